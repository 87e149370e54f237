use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::netcore::{
    grad_wrt_input, input_loss, receptive_field, AdamConfig, AdamState, ArchitectureSpec, LossSpec,
    ModelWeights, Sign,
};
use crate::{Error, Result};

/// Optimizer settings; regularization strengths are divided by the layer's
/// receptive field so deeper layers are not regularized harder.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FeatVizConfig {
    pub lr: f64,
    pub steps: usize,
    pub init_std: f64,
    pub l1_scale: f64,
    pub l2_scale: f64,
    pub seed: u64,
}

impl Default for FeatVizConfig {
    fn default() -> Self {
        Self {
            lr: 0.05,
            steps: 16,
            init_std: 0.001,
            l1_scale: 15.0,
            l2_scale: 0.1,
            seed: 0,
        }
    }
}

impl FeatVizConfig {
    pub fn l1(&self, receptive_field: usize) -> f64 {
        self.l1_scale / receptive_field as f64
    }

    pub fn l2(&self, receptive_field: usize) -> f64 {
        self.l2_scale / receptive_field as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimalInput {
    pub layer: usize,
    pub neurons: Vec<(usize, Sign)>,
    pub receptive_field: usize,
    pub l1: f64,
    pub l2: f64,
    pub config: FeatVizConfig,
    /// Loss before each step, then after the last one (`steps + 1` entries).
    pub losses: Vec<f64>,
    /// `bins × receptive_field`
    #[serde(skip)]
    pub input: Array2<f64>,
}

impl OptimalInput {
    pub fn initial_loss(&self) -> f64 {
        self.losses[0]
    }

    pub fn final_loss(&self) -> f64 {
        *self.losses.last().expect("non-empty trajectory")
    }
}

/// Optimizes an input of exactly `RF_layer` frames, so that `layer` emits a
/// single frame, to maximize the pre-activation of positive neurons and
/// minimize that of negative ones under L1/L2 regularization.
pub fn optimize_input(
    spec: &ArchitectureSpec,
    weights: &ModelWeights,
    layer: usize,
    neurons: &[(usize, Sign)],
    config: &FeatVizConfig,
) -> Result<OptimalInput> {
    if layer == 0 || layer > spec.num_layers() {
        return Err(Error::Index {
            what: "layer",
            index: layer,
            len: spec.num_layers(),
        });
    }
    if config.init_std.is_nan() || config.init_std <= 0.0 {
        return Err(Error::Config("init_std must be positive".into()));
    }
    let rf = receptive_field(spec, layer)?.size;
    let loss = LossSpec {
        layer,
        frame: 0,
        neurons: neurons.to_vec(),
        l1: config.l1(rf),
        l2: config.l2(rf),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let normal = Normal::new(0.0, config.init_std).expect("positive std");
    let mut input = Array2::from_shape_simple_fn((spec.input_bins, rf), || normal.sample(&mut rng));
    let mut adam = AdamState::new(AdamConfig::with_lr(config.lr), input.len());
    let mut losses = Vec::with_capacity(config.steps + 1);
    for step in 0..config.steps {
        let g = grad_wrt_input(spec, weights, input.view(), &loss)?;
        if !g.loss.is_finite() || !g.gradient.iter().all(|v| v.is_finite()) {
            return Err(Error::Numeric(format!(
                "non-finite loss or gradient at step {step} (loss {})",
                g.loss
            )));
        }
        losses.push(g.loss);
        adam.step(
            input.as_slice_mut().expect("standard layout"),
            g.gradient.as_slice().expect("standard layout"),
        )?;
    }
    let last = input_loss(spec, weights, input.view(), &loss)?;
    if !last.is_finite() {
        return Err(Error::Numeric(format!("final loss is {last}")));
    }
    losses.push(last);
    Ok(OptimalInput {
        layer,
        neurons: neurons.to_vec(),
        receptive_field: rf,
        l1: loss.l1,
        l2: loss.l2,
        config: config.clone(),
        losses,
        input,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netcore::{Activation, LayerSpec};
    use ndarray::Array3;
    use rand::Rng;

    /// Linear layer whose kernels are `±scale` with random signs.
    fn linear(bins: usize, kernel: usize, scale: f64) -> (ArchitectureSpec, ModelWeights) {
        let spec = ArchitectureSpec {
            input_bins: bins,
            layers: vec![LayerSpec {
                in_channels: bins,
                out_channels: 2,
                kernel,
                stride: 1,
                activation: Activation::Identity,
            }],
        };
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let mut weights = ModelWeights::zeros(&spec);
        weights.layers[0].kernel = Array3::from_shape_fn((2, bins, kernel), |_| {
            if rng.random_bool(0.5) {
                scale
            } else {
                -scale
            }
        });
        (spec, weights)
    }

    fn cosine(a: &Array2<f64>, b: ndarray::ArrayView2<f64>) -> f64 {
        let dot = (a * &b).sum();
        dot / (a.mapv(|v| v * v).sum().sqrt() * b.mapv(|v| v * v).sum().sqrt())
    }

    #[test]
    fn linear_model_moves_toward_kernel() {
        let (spec, weights) = linear(4, 3, 0.7);
        let kernel = weights.layers[0].kernel.index_axis(ndarray::Axis(0), 1);
        let mut last = f64::NEG_INFINITY;
        for steps in 1..=16 {
            let cfg = FeatVizConfig {
                steps,
                l1_scale: 0.0,
                l2_scale: 0.0,
                seed: 3,
                ..Default::default()
            };
            let out = optimize_input(&spec, &weights, 1, &[(1, Sign::Positive)], &cfg).unwrap();
            let c = cosine(&out.input, kernel);
            assert!(c > last, "steps {steps}: cosine {c} <= {last}");
            last = c;
        }
        assert!(last > 0.9);
    }

    #[test]
    fn hyperparameters_are_recorded() {
        let (spec, weights) = linear(4, 5, 5.0);
        let out = optimize_input(
            &spec,
            &weights,
            1,
            &[(0, Sign::Negative)],
            &FeatVizConfig::default(),
        )
        .unwrap();
        assert_eq!(out.config.lr, 0.05);
        assert_eq!(out.config.steps, 16);
        assert_eq!(out.config.init_std, 0.001);
        assert_eq!(out.receptive_field, 5);
        assert_eq!(out.l1, 15.0 / 5.0);
        assert_eq!(out.l2, 0.1 / 5.0);
        assert_eq!(out.losses.len(), 17);
        assert_eq!(out.input.dim(), (4, 5));
        assert!(out.final_loss() < out.initial_loss());
    }

    #[test]
    fn seed_deterministic() {
        let (spec, weights) = linear(3, 2, 1.0);
        let cfg = FeatVizConfig {
            seed: 5,
            ..Default::default()
        };
        let a = optimize_input(&spec, &weights, 1, &[(0, Sign::Positive)], &cfg).unwrap();
        let b = optimize_input(&spec, &weights, 1, &[(0, Sign::Positive)], &cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.input, b.input);
    }

    #[test]
    fn regularization_shrinks_with_receptive_field() {
        let cfg = FeatVizConfig::default();
        let fields = [5, 9, 11, 60];
        for pair in fields.windows(2) {
            assert!(cfg.l1(pair[1]) < cfg.l1(pair[0]));
            assert!(cfg.l2(pair[1]) < cfg.l2(pair[0]));
        }
    }

    #[test]
    fn non_finite_weights_abort() {
        let (spec, mut weights) = linear(2, 2, 1.0);
        weights.layers[0].kernel[[0, 0, 0]] = f64::NAN;
        let err = optimize_input(
            &spec,
            &weights,
            1,
            &[(0, Sign::Positive)],
            &FeatVizConfig::default(),
        );
        assert!(matches!(err, Err(Error::Numeric(_))));
    }

    #[test]
    fn bad_layer_or_neuron() {
        let (spec, weights) = linear(2, 2, 1.0);
        let cfg = FeatVizConfig::default();
        assert!(optimize_input(&spec, &weights, 2, &[], &cfg).is_err());
        assert!(optimize_input(&spec, &weights, 1, &[(7, Sign::Positive)], &cfg).is_err());
    }
}
