//! Experiment configuration: one TOML file with a master seed and one
//! section per stage. Every field has a default, so an empty file runs the
//! built-in three-class toy experiment.

use std::path::Path;

use gradnap_core::clustering::Normalization;
use gradnap_core::data::{ClassSpec, GenerateConfig};
use gradnap_core::gradnap::{ChannelReduction, Grouping, MaskMode, PipelineConfig};
use gradnap_core::model::TrainConfig;
use gradnap_core::netcore::{ArchitectureSpec, LayerSpec, TargetMode};
use gradnap_core::presets;
use gradnap_core::respviz::FeatVizConfig;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub data: DataSection,
    pub model: ModelSection,
    pub train: TrainSection,
    pub gradnap: GradNapSection,
    pub featviz: FeatVizSection,
    pub cluster: ClusterSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataSection {
    pub examples: usize,
    pub bins: usize,
    pub frames: usize,
    pub noise_std: f64,
    pub silence_prob: f64,
    pub silence_min: usize,
    pub silence_max: usize,
    pub classes: Vec<ClassSpec>,
}

impl Default for DataSection {
    fn default() -> Self {
        let toy = presets::toy_data(0);
        DataSection {
            examples: toy.examples,
            bins: toy.bins,
            frames: toy.frames,
            noise_std: toy.noise_std,
            silence_prob: toy.silence_prob,
            silence_min: toy.silence_min,
            silence_max: toy.silence_max,
            classes: toy.classes,
        }
    }
}

impl DataSection {
    pub fn generate_config(&self, seed: u64) -> GenerateConfig {
        GenerateConfig {
            classes: self.classes.clone(),
            examples: self.examples,
            bins: self.bins,
            frames: self.frames,
            noise_std: self.noise_std,
            seed,
            silence_prob: self.silence_prob,
            silence_min: self.silence_min,
            silence_max: self.silence_max,
        }
    }
}

/// Network layers; empty means the toy preset sized to the data.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSection {
    pub layers: Vec<LayerSpec>,
}

impl ModelSection {
    /// `classes` counts silence.
    pub fn architecture(&self, bins: usize, classes: usize) -> ArchitectureSpec {
        if self.layers.is_empty() {
            presets::toy_architecture(bins, classes)
        } else {
            ArchitectureSpec {
                input_bins: bins,
                layers: self.layers.clone(),
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
}

impl Default for TrainSection {
    fn default() -> Self {
        let toy = presets::toy_training(0);
        TrainSection {
            epochs: toy.epochs,
            batch_size: toy.batch_size,
            learning_rate: toy.learning_rate,
        }
    }
}

impl TrainSection {
    pub fn train_config(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            epochs: self.epochs,
            batch_size: self.batch_size,
            learning_rate: self.learning_rate,
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GradNapSection {
    /// Grouping schemes computed by `run-all`.
    pub groupings: Vec<Grouping>,
    pub window_input: Option<usize>,
    pub mask: MaskMode,
    pub reduction: ChannelReduction,
    pub target: TargetMode,
    pub include_silence: bool,
}

impl Default for GradNapSection {
    fn default() -> Self {
        let p = PipelineConfig::default();
        GradNapSection {
            groupings: vec![Grouping::ByPredicted, Grouping::ByTrueLabel],
            window_input: p.window_input,
            mask: p.mask,
            reduction: p.reduction,
            target: p.target,
            include_silence: p.include_silence,
        }
    }
}

impl GradNapSection {
    pub fn pipeline_config(&self, grouping: Grouping) -> PipelineConfig {
        PipelineConfig {
            grouping,
            window_input: self.window_input,
            mask: self.mask,
            reduction: self.reduction,
            target: self.target,
            include_silence: self.include_silence,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeatVizSection {
    pub layer: usize,
    pub top: usize,
    pub lr: f64,
    pub steps: usize,
    pub init_std: f64,
    pub l1_scale: f64,
    pub l2_scale: f64,
}

impl Default for FeatVizSection {
    fn default() -> Self {
        let f = FeatVizConfig::default();
        FeatVizSection {
            layer: 2,
            top: 5,
            lr: f.lr,
            steps: f.steps,
            init_std: f.init_std,
            l1_scale: f.l1_scale,
            l2_scale: f.l2_scale,
        }
    }
}

impl FeatVizSection {
    pub fn featviz_config(&self, seed: u64) -> FeatVizConfig {
        FeatVizConfig {
            lr: self.lr,
            steps: self.steps,
            init_std: self.init_std,
            l1_scale: self.l1_scale,
            l2_scale: self.l2_scale,
            seed,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClusterSection {
    pub normalization: Normalization,
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> CliResult<Self> {
        toml::from_str(text).map_err(|e| CliError::usage(format!("invalid config: {e}")))
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::usage(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
            .map_err(|e| CliError::usage(format!("{}: {}", path.display(), e.message)))
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    /// sha256 of the canonical (re-serialized) form, so formatting and
    /// comments do not change the hash.
    pub fn hash(&self) -> String {
        crate::manifest::hex(&Sha256::digest(self.to_toml_string().as_bytes()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_is_the_toy_experiment() {
        let c = ExperimentConfig::from_toml_str("").unwrap();
        assert_eq!(c, ExperimentConfig::default());
        assert_eq!(c.data.classes.len(), 3);
        assert_eq!(c.featviz.lr, 0.05);
        assert_eq!(c.featviz.steps, 16);
    }

    #[test]
    fn round_trip_and_hash_ignore_formatting() {
        let c = ExperimentConfig {
            seed: 9,
            ..Default::default()
        };
        let text = c.to_toml_string();
        let back = ExperimentConfig::from_toml_str(&text).unwrap();
        assert_eq!(back, c);
        let spaced = format!("# comment\n\n{text}");
        assert_eq!(
            ExperimentConfig::from_toml_str(&spaced).unwrap().hash(),
            c.hash()
        );
        assert_ne!(ExperimentConfig::default().hash(), c.hash());
    }

    #[test]
    fn partial_sections_keep_defaults() {
        let c = ExperimentConfig::from_toml_str(
            "seed = 3\n[train]\nepochs = 2\n[gradnap]\ngroupings = [\"true\"]\nmask = \"signed_min_max\"\n",
        )
        .unwrap();
        assert_eq!(c.train.epochs, 2);
        assert_eq!(c.train.batch_size, TrainSection::default().batch_size);
        assert_eq!(c.gradnap.groupings, vec![Grouping::ByTrueLabel]);
        assert_eq!(c.gradnap.mask, MaskMode::SignedMinMax);
    }

    #[test]
    fn unknown_keys_are_usage_errors() {
        let e = ExperimentConfig::from_toml_str("[train]\nepoch = 2\n").unwrap_err();
        assert_eq!(e.exit_code(), 2);
    }
}
