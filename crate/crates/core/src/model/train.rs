use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{argmax, output_labels};
use crate::data::{Dataset, Example};
use crate::netcore::{
    forward, receptive_field, weight_gradients, AdamConfig, AdamState, ArchitectureSpec,
    LayerWeights, ModelWeights, ReceptiveField,
};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 20,
            batch_size: 8,
            learning_rate: 0.01,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub weights: ModelWeights,
    /// Mean frame cross-entropy over the dataset; entry 0 is before training,
    /// entry `e` after epoch `e`.
    pub losses: Vec<f64>,
    /// Frame accuracy on the training set after the last epoch.
    pub accuracy: f64,
}

struct ExampleGrad {
    loss: f64,
    frames: usize,
    grads: Vec<LayerWeights>,
}

fn check_dataset(spec: &ArchitectureSpec, dataset: &Dataset) -> Result<ReceptiveField> {
    if dataset.bins != spec.input_bins {
        return Err(Error::Config(format!(
            "dataset has {} bins, architecture expects {}",
            dataset.bins, spec.input_bins
        )));
    }
    dataset.validate()?;
    let field = receptive_field(spec, spec.num_layers())?;
    for ex in &dataset.examples {
        if ex.frames() < field.size {
            return Err(Error::Dataset {
                example: ex.id.clone(),
                detail: format!("{} frames, receptive field is {}", ex.frames(), field.size),
            });
        }
        if let Some(&bad) = ex.labels.iter().find(|&&c| c >= spec.num_classes()) {
            return Err(Error::Dataset {
                example: ex.id.clone(),
                detail: format!(
                    "label {bad} but the model has {} classes",
                    spec.num_classes()
                ),
            });
        }
    }
    Ok(field)
}

fn example_grad(
    spec: &ArchitectureSpec,
    weights: &ModelWeights,
    field: ReceptiveField,
    example: &Example,
    with_grads: bool,
) -> Result<ExampleGrad> {
    let trace = forward(spec, weights, example.spectrogram.view())?;
    let logits = trace.logits();
    let labels = output_labels(field, &example.labels, logits.ncols());
    let mut d_logits = Array2::<f64>::zeros(logits.dim());
    let mut loss = 0.0;
    for (t, &label) in labels.iter().enumerate() {
        let column = logits.column(t);
        let max = column.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
        let total: f64 = column.iter().map(|&v| (v - max).exp()).sum();
        let log_z = max + total.ln();
        loss += log_z - column[label];
        for (c, &v) in column.iter().enumerate() {
            d_logits[[c, t]] = (v - log_z).exp() - if c == label { 1.0 } else { 0.0 };
        }
    }
    let grads = if with_grads {
        weight_gradients(spec, weights, &trace, d_logits.view())
    } else {
        Vec::new()
    };
    Ok(ExampleGrad {
        loss,
        frames: labels.len(),
        grads,
    })
}

fn mean_loss(
    spec: &ArchitectureSpec,
    weights: &ModelWeights,
    field: ReceptiveField,
    dataset: &Dataset,
) -> Result<f64> {
    let parts: Vec<ExampleGrad> = dataset
        .examples
        .par_iter()
        .map(|ex| example_grad(spec, weights, field, ex, false))
        .collect::<Result<_>>()?;
    let (loss, frames) = parts
        .iter()
        .fold((0.0, 0usize), |(l, n), p| (l + p.loss, n + p.frames));
    Ok(loss / frames.max(1) as f64)
}

/// Fraction of output frames whose argmax matches the center-mapped label.
pub fn frame_accuracy(
    spec: &ArchitectureSpec,
    weights: &ModelWeights,
    dataset: &Dataset,
) -> Result<f64> {
    let field = check_dataset(spec, dataset)?;
    let counts: Vec<(usize, usize)> = dataset
        .examples
        .par_iter()
        .map(|ex| {
            let trace = forward(spec, weights, ex.spectrogram.view())?;
            let logits = trace.logits();
            let labels = output_labels(field, &ex.labels, logits.ncols());
            let hits = labels
                .iter()
                .enumerate()
                .filter(|&(t, &l)| argmax(logits.column(t)) == l)
                .count();
            Ok((hits, labels.len()))
        })
        .collect::<Result<_>>()?;
    let (hits, total) = counts.iter().fold((0, 0), |(h, n), &(a, b)| (h + a, n + b));
    Ok(hits as f64 / total.max(1) as f64)
}

/// Minimizes mean frame-wise cross-entropy with Adam. Per-example gradients
/// run in parallel but are summed in example order, so the result depends
/// only on the seed.
pub fn train_toy(
    spec: &ArchitectureSpec,
    dataset: &Dataset,
    config: &TrainConfig,
) -> Result<TrainOutcome> {
    spec.validate()?;
    if config.epochs == 0
        || config.batch_size == 0
        || config.learning_rate.is_nan()
        || config.learning_rate <= 0.0
    {
        return Err(Error::Config(
            "epochs, batch_size and learning_rate must be positive".into(),
        ));
    }
    let field = check_dataset(spec, dataset)?;
    if dataset.examples.is_empty() {
        return Err(Error::Config("cannot train on an empty dataset".into()));
    }
    let mut weights = ModelWeights::init(spec, config.seed);
    let adam = AdamConfig::with_lr(config.learning_rate);
    let mut states: Vec<(AdamState, AdamState)> = weights
        .layers
        .iter()
        .map(|l| {
            (
                AdamState::new(adam, l.kernel.len()),
                AdamState::new(adam, l.bias.len()),
            )
        })
        .collect();
    let mut order: Vec<usize> = (0..dataset.examples.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(1);

    let mut losses = vec![mean_loss(spec, &weights, field, dataset)?];
    for _ in 0..config.epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(config.batch_size) {
            let parts: Vec<ExampleGrad> = batch
                .par_iter()
                .map(|&i| example_grad(spec, &weights, field, &dataset.examples[i], true))
                .collect::<Result<_>>()?;
            let frames: usize = parts.iter().map(|p| p.frames).sum();
            let scale = 1.0 / frames.max(1) as f64;
            let mut total = ModelWeights::zeros(spec).layers;
            for part in &parts {
                for (acc, g) in total.iter_mut().zip(&part.grads) {
                    acc.kernel += &g.kernel;
                    acc.bias += &g.bias;
                }
            }
            for ((layer, grad), (k_state, b_state)) in
                weights.layers.iter_mut().zip(&mut total).zip(&mut states)
            {
                grad.kernel.mapv_inplace(|g| g * scale);
                grad.bias.mapv_inplace(|g| g * scale);
                k_state.step(
                    layer.kernel.as_slice_mut().expect("standard layout"),
                    grad.kernel.as_slice().expect("standard layout"),
                )?;
                b_state.step(
                    layer.bias.as_slice_mut().expect("standard layout"),
                    grad.bias.as_slice().expect("standard layout"),
                )?;
            }
        }
        let loss = mean_loss(spec, &weights, field, dataset)?;
        if !loss.is_finite() {
            return Err(Error::Numeric(format!("training loss became {loss}")));
        }
        losses.push(loss);
    }
    let accuracy = frame_accuracy(spec, &weights, dataset)?;
    Ok(TrainOutcome {
        weights,
        losses,
        accuracy,
    })
}
