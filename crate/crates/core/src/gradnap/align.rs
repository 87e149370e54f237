use ndarray::{s, Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::netcore::{receptive_cone, ArchitectureSpec, LayerTrace, SensitivityTrace};
use crate::Result;

/// How channel contributions are combined when scoring a frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChannelReduction {
    #[default]
    Sum,
    Max,
}

/// Activation and gradient crops of one layer around its aligned center.
#[derive(Debug, Clone, PartialEq)]
pub struct AlignedWindow {
    pub layer: usize,
    /// Aligned center in this layer's frames.
    pub center: usize,
    /// `C_l × W_l`
    pub activation: Array2<f64>,
    /// `C_l × W_l`
    pub gradient: Array2<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Alignment {
    /// One window per layer, input first.
    Aligned(Vec<AlignedWindow>),
    /// The window of `layer` would cross a sequence edge.
    Skipped { layer: usize },
}

/// Half-width of the layer window for an input-frame window width.
pub fn half_width(window_input: usize, stride_product: usize) -> usize {
    window_input / stride_product / 2
}

/// Frame relevance score. With activations it is the channel reduction of
/// `|gradient| · activation`; without (the input layer) of `|gradient|`.
pub fn frame_score(
    activation: Option<ArrayView2<f64>>,
    gradient: ArrayView2<f64>,
    t: usize,
    reduction: ChannelReduction,
) -> f64 {
    let column = gradient.column(t);
    let terms = column.iter().enumerate().map(|(c, g)| match &activation {
        Some(a) => g.abs() * a[[c, t]],
        None => g.abs(),
    });
    match reduction {
        ChannelReduction::Sum => terms.sum(),
        ChannelReduction::Max => terms.fold(f64::NEG_INFINITY, f64::max),
    }
}

/// Earliest frame in `lo..=hi` with maximal [`frame_score`].
pub fn best_frame(
    activation: Option<ArrayView2<f64>>,
    gradient: ArrayView2<f64>,
    lo: usize,
    hi: usize,
    reduction: ChannelReduction,
) -> usize {
    let mut best = lo;
    let mut best_score = frame_score(activation, gradient, lo, reduction);
    for t in lo + 1..=hi {
        let score = frame_score(activation, gradient, t, reduction);
        if score > best_score {
            best = t;
            best_score = score;
        }
    }
    best
}

/// Centers every layer on its most prediction-relevant frame within the
/// receptive cone of the target output frame, then crops activation and
/// gradient windows of half-width `window_input / S_l / 2`.
pub fn align_occurrence(
    spec: &ArchitectureSpec,
    trace: &LayerTrace,
    sensitivity: &SensitivityTrace,
    window_input: usize,
    reduction: ChannelReduction,
) -> Result<Alignment> {
    let depth = spec.num_layers();
    let output_frame = sensitivity.target.output_frame;
    let mut windows = Vec::with_capacity(depth + 1);
    for l in 0..=depth {
        let activation = trace.activation(l);
        let gradient = sensitivity.gradient(l);
        let frames = activation.ncols();
        let (lo, hi) = receptive_cone(spec, depth, output_frame, l);
        let hi = hi.min(frames - 1);
        let act = (l > 0).then_some(activation);
        let center = best_frame(act, gradient, lo, hi, reduction);
        let h = half_width(window_input, trace.field(l).stride_product);
        if center < h || center + h >= frames {
            return Ok(Alignment::Skipped { layer: l });
        }
        let cols = s![.., center - h..=center + h];
        windows.push(AlignedWindow {
            layer: l,
            center,
            activation: activation.slice(cols).to_owned(),
            gradient: gradient.slice(cols).to_owned(),
        });
    }
    Ok(Alignment::Aligned(windows))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::arr2;
    use proptest::prelude::*;

    #[test]
    fn single_peak() {
        let a = arr2(&[[0.0, 1.0, 0.0]]);
        let g = arr2(&[[1.0, 1.0, 1.0]]);
        assert_eq!(
            best_frame(Some(a.view()), g.view(), 0, 2, ChannelReduction::Sum),
            1
        );
    }

    #[test]
    fn ties_choose_earliest() {
        let a = arr2(&[[1.0, 1.0]]);
        let g = arr2(&[[1.0, 1.0]]);
        assert_eq!(
            best_frame(Some(a.view()), g.view(), 0, 1, ChannelReduction::Sum),
            0
        );
    }

    #[test]
    fn input_uses_gradient_magnitude_only() {
        let g = arr2(&[[0.1, -3.0, 2.0], [0.0, 0.5, 1.0]]);
        assert_eq!(best_frame(None, g.view(), 0, 2, ChannelReduction::Sum), 1);
        assert_eq!(best_frame(None, g.view(), 0, 2, ChannelReduction::Max), 1);
        assert_eq!(best_frame(None, g.view(), 2, 2, ChannelReduction::Sum), 2);
    }

    #[test]
    fn max_reduction_differs_from_sum() {
        let a = arr2(&[[1.0, 3.0], [1.0, 0.0], [1.0, 0.0]]);
        let g = arr2(&[[1.0, 1.0], [1.0, 1.0], [1.0, 1.0]]);
        assert_eq!(
            best_frame(Some(a.view()), g.view(), 0, 1, ChannelReduction::Sum),
            0
        );
        assert_eq!(
            best_frame(Some(a.view()), g.view(), 0, 1, ChannelReduction::Max),
            1
        );
    }

    #[test]
    fn half_widths() {
        assert_eq!(half_width(11, 1), 5);
        assert_eq!(half_width(11, 2), 2);
        assert_eq!(half_width(12, 1), 6);
        assert_eq!(half_width(3, 4), 0);
    }

    proptest! {
        #[test]
        fn argmax_matches_brute_force(
            c in 1usize..4,
            t in 1usize..12,
            seed in prop::collection::vec(-2.0f64..2.0, 96),
        ) {
            let a = Array2::from_shape_fn((c, t), |(i, j)| seed[(i * 12 + j) % 96]);
            let g = Array2::from_shape_fn((c, t), |(i, j)| seed[(i * 12 + j + 37) % 96]);
            let got = best_frame(Some(a.view()), g.view(), 0, t - 1, ChannelReduction::Sum);
            let scores: Vec<f64> = (0..t)
                .map(|j| (0..c).map(|i| g[[i, j]].abs() * a[[i, j]]).sum())
                .collect();
            let max = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let want = scores.iter().position(|&s| s == max).unwrap();
            prop_assert_eq!(got, want);
        }
    }
}
