use std::path::Path;

use ndarray::{Array1, Array3};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    #[default]
    Relu,
    Tanh,
    Identity,
}

impl Activation {
    #[inline]
    pub fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::Tanh => z.tanh(),
            Activation::Identity => z,
        }
    }

    /// Derivative evaluated at the pre-activation `z`. The relu kink at 0
    /// takes the left derivative.
    #[inline]
    pub fn derivative(self, z: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => {
                let t = z.tanh();
                1.0 - t * t
            }
            Activation::Identity => 1.0,
        }
    }
}

fn default_stride() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel: usize,
    #[serde(default = "default_stride")]
    pub stride: usize,
    #[serde(default)]
    pub activation: Activation,
}

/// Layer stack of a fully-convolutional 1D network over `input_bins`
/// frequency rows.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArchitectureSpec {
    pub input_bins: usize,
    pub layers: Vec<LayerSpec>,
}

impl ArchitectureSpec {
    pub fn validate(&self) -> Result<()> {
        if self.layers.is_empty() {
            return Err(Error::Config("architecture has no layers".into()));
        }
        if self.input_bins == 0 {
            return Err(Error::Config("input_bins must be positive".into()));
        }
        let mut expected_in = self.input_bins;
        for (i, layer) in self.layers.iter().enumerate() {
            let l = i + 1;
            if layer.in_channels != expected_in {
                return Err(Error::Config(format!(
                    "layer {l}: in_channels {} does not match previous width {expected_in}",
                    layer.in_channels
                )));
            }
            if layer.kernel == 0 || layer.stride == 0 || layer.out_channels == 0 {
                return Err(Error::Config(format!(
                    "layer {l}: kernel, stride and out_channels must be >= 1"
                )));
            }
            expected_in = layer.out_channels;
        }
        Ok(())
    }

    pub fn num_layers(&self) -> usize {
        self.layers.len()
    }

    /// Number of output classes (width of the final layer).
    pub fn num_classes(&self) -> usize {
        self.layers.last().map_or(0, |l| l.out_channels)
    }

    /// Channel count of layer `l`; layer 0 is the input spectrogram.
    pub fn channels(&self, l: usize) -> usize {
        if l == 0 {
            self.input_bins
        } else {
            self.layers[l - 1].out_channels
        }
    }

    /// Frames produced by layer `l` for an input of `input_frames`, or
    /// `None` if the input is too short to produce any.
    pub fn frames_at(&self, l: usize, input_frames: usize) -> Option<usize> {
        let mut t = input_frames;
        for layer in &self.layers[..l] {
            if t < layer.kernel {
                return None;
            }
            t = (t - layer.kernel) / layer.stride + 1;
        }
        Some(t)
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let spec: ArchitectureSpec =
            toml::from_str(text).map_err(|e| Error::Config(format!("architecture: {e}")))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("architecture serializes")
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerWeights {
    /// `out_channels × in_channels × kernel`
    pub kernel: Array3<f64>,
    pub bias: Array1<f64>,
}

impl LayerWeights {
    pub fn zeros(spec: &LayerSpec) -> Self {
        Self {
            kernel: Array3::zeros((spec.out_channels, spec.in_channels, spec.kernel)),
            bias: Array1::zeros(spec.out_channels),
        }
    }

    pub fn out_channels(&self) -> usize {
        self.kernel.dim().0
    }

    pub fn in_channels(&self) -> usize {
        self.kernel.dim().1
    }

    pub fn kernel_len(&self) -> usize {
        self.kernel.dim().2
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelWeights {
    pub layers: Vec<LayerWeights>,
}

impl ModelWeights {
    pub fn zeros(spec: &ArchitectureSpec) -> Self {
        Self {
            layers: spec.layers.iter().map(LayerWeights::zeros).collect(),
        }
    }

    /// He-normal kernels and zero biases, deterministic in `seed`.
    pub fn init(spec: &ArchitectureSpec, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let layers = spec
            .layers
            .iter()
            .map(|layer| {
                let fan_in = (layer.in_channels * layer.kernel) as f64;
                let normal = Normal::new(0.0, (2.0 / fan_in).sqrt()).expect("positive std");
                let mut weights = LayerWeights::zeros(layer);
                weights
                    .kernel
                    .iter_mut()
                    .for_each(|w| *w = normal.sample(&mut rng));
                weights
            })
            .collect();
        Self { layers }
    }

    /// Checks that every tensor has the shape `spec` requires; the error
    /// names the first offending layer (1-based).
    pub fn check_shapes(&self, spec: &ArchitectureSpec) -> Result<()> {
        if self.layers.len() != spec.layers.len() {
            return Err(Error::ShapeMismatch {
                layer: self.layers.len().min(spec.layers.len()) + 1,
                detail: format!(
                    "weights have {} layers, architecture has {}",
                    self.layers.len(),
                    spec.layers.len()
                ),
            });
        }
        for (i, (w, s)) in self.layers.iter().zip(&spec.layers).enumerate() {
            let want = (s.out_channels, s.in_channels, s.kernel);
            if w.kernel.dim() != want || w.bias.len() != s.out_channels {
                return Err(Error::ShapeMismatch {
                    layer: i + 1,
                    detail: format!(
                        "kernel {:?} / bias {} vs expected {:?} / {}",
                        w.kernel.dim(),
                        w.bias.len(),
                        want,
                        s.out_channels
                    ),
                });
            }
        }
        Ok(())
    }

    pub fn check(&self, spec: &ArchitectureSpec) -> Result<()> {
        self.check_shapes(spec)?;
        for (i, w) in self.layers.iter().enumerate() {
            if !w.kernel.iter().chain(w.bias.iter()).all(|v| v.is_finite()) {
                return Err(Error::Numeric(format!(
                    "layer {} has non-finite weights",
                    i + 1
                )));
            }
        }
        Ok(())
    }

    /// Rounds every value through `f32`, matching what a weight file stores.
    pub fn to_f32_precision(&self) -> Self {
        let mut out = self.clone();
        for layer in &mut out.layers {
            layer.kernel.mapv_inplace(|v| v as f32 as f64);
            layer.bias.mapv_inplace(|v| v as f32 as f64);
        }
        out
    }
}
