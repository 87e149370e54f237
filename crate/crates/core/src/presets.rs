//! Default desk-scale experiment: three single-band classes on 32 bins and
//! a 3-layer network.

use crate::data::{Band, ClassSpec, GenerateConfig, Pattern};
use crate::model::TrainConfig;
use crate::netcore::{Activation, ArchitectureSpec, LayerSpec};

pub const TOY_BINS: usize = 32;

/// Single-band classes `A`, `B`, `C` centered on bins 6, 16 and 26.
pub fn toy_classes() -> Vec<ClassSpec> {
    [("A", 6), ("B", 16), ("C", 26)]
        .into_iter()
        .map(|(name, center)| ClassSpec {
            name: name.to_string(),
            pattern: Pattern::Bands {
                bands: vec![Band {
                    center,
                    width: 1,
                    intensity: 3.0,
                }],
            },
            segment_min: 8,
            segment_max: 14,
        })
        .collect()
}

pub fn toy_data(seed: u64) -> GenerateConfig {
    GenerateConfig {
        classes: toy_classes(),
        examples: 48,
        bins: TOY_BINS,
        frames: 128,
        noise_std: 0.5,
        seed,
        silence_prob: 0.25,
        silence_min: 4,
        silence_max: 8,
    }
}

/// 3-layer network, receptive fields 15/27/31; `classes` includes silence.
pub fn toy_architecture(bins: usize, classes: usize) -> ArchitectureSpec {
    let layer = |in_channels, out_channels, kernel, stride, activation| LayerSpec {
        in_channels,
        out_channels,
        kernel,
        stride,
        activation,
    };
    ArchitectureSpec {
        input_bins: bins,
        layers: vec![
            layer(bins, 48, 15, 2, Activation::Relu),
            layer(48, 48, 7, 1, Activation::Relu),
            layer(48, classes, 3, 1, Activation::Identity),
        ],
    }
}

pub fn toy_training(seed: u64) -> TrainConfig {
    TrainConfig {
        epochs: 15,
        batch_size: 8,
        learning_rate: 0.01,
        seed,
    }
}
