//! Frame-wise prediction, weight persistence and a toy trainer.

mod io;
mod train;

use ndarray::{Array2, ArrayView1, ArrayView2};

use crate::netcore::{forward, receptive_field, ArchitectureSpec, ModelWeights, ReceptiveField};
use crate::Result;

pub use io::{load_weights, save_weights, WEIGHTS_MAGIC};
pub use train::{frame_accuracy, train_toy, TrainConfig, TrainOutcome};

/// Index of the largest value; ties resolve to the lowest index.
pub fn argmax(column: ArrayView1<f64>) -> usize {
    let mut best = 0;
    for (i, &v) in column.iter().enumerate() {
        if v > column[best] {
            best = i;
        }
    }
    best
}

/// Per-output-frame predicted classes and logits.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionTrack {
    pub classes: Vec<usize>,
    /// `classes × frames`
    pub logits: Array2<f64>,
    pub field: ReceptiveField,
}

impl PredictionTrack {
    pub fn len(&self) -> usize {
        self.classes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.classes.is_empty()
    }

    pub fn from_logits(logits: Array2<f64>, field: ReceptiveField) -> Self {
        let classes = logits.columns().into_iter().map(argmax).collect();
        Self {
            classes,
            logits,
            field,
        }
    }
}

pub fn predict_frames(
    spec: &ArchitectureSpec,
    weights: &ModelWeights,
    spectrogram: ArrayView2<f64>,
) -> Result<PredictionTrack> {
    let trace = forward(spec, weights, spectrogram)?;
    let field = receptive_field(spec, spec.num_layers())?;
    Ok(PredictionTrack::from_logits(
        trace.logits().to_owned(),
        field,
    ))
}

/// Maps input-frame labels onto output frames by taking the label at each
/// output frame's receptive-field center.
pub fn output_labels(field: ReceptiveField, labels: &[usize], out_frames: usize) -> Vec<usize> {
    (0..out_frames).map(|t| labels[field.center(t)]).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::arr1;

    #[test]
    fn argmax_picks_largest() {
        assert_eq!(argmax(arr1(&[0.1, 0.9, 0.2]).view()), 1);
    }

    #[test]
    fn argmax_ties_go_low() {
        assert_eq!(argmax(arr1(&[0.5, 0.5]).view()), 0);
        assert_eq!(argmax(arr1(&[-1.0, 2.0, 2.0]).view()), 1);
    }

    #[test]
    fn output_labels_use_centers() {
        let field = ReceptiveField {
            size: 3,
            stride_product: 2,
            center_offset: 1,
        };
        let labels = [0, 1, 2, 3, 4, 5, 6];
        assert_eq!(output_labels(field, &labels, 3), vec![1, 3, 5]);
    }
}
