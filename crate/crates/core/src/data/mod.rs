//! Synthetic spectrogram-like datasets with known spectral ground truth.
//!
//! Each example is a random concatenation of class segments and silence,
//! plus Gaussian background noise, z-normalized per frequency bin over the
//! whole dataset. Class index 0 is reserved for silence.

mod io;

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub use io::{load_dataset, read_spec_file, save_dataset, write_spec_file, DATASET_VERSION};

/// Reserved class index for silence frames.
pub const SILENCE: usize = 0;
pub const SILENCE_NAME: &str = "silence";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Band {
    pub center: usize,
    /// Half-width: the band covers `center - width ..= center + width`.
    pub width: usize,
    pub intensity: f64,
}

impl Band {
    pub fn lo(&self) -> usize {
        self.center - self.width
    }

    pub fn hi(&self) -> usize {
        self.center + self.width
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Pattern {
    Silence,
    /// Stationary energy in fixed frequency bands, formant-like.
    Bands {
        bands: Vec<Band>,
    },
    /// Broadband energy falling from high to low over the segment.
    Transient {
        onset_sharpness: f64,
        broadband_intensity: f64,
    },
}

impl Pattern {
    /// Energy at bin `f` for frame `u` of a segment of `len` frames.
    fn energy(&self, f: usize, u: usize, len: usize) -> f64 {
        match self {
            Pattern::Silence => 0.0,
            Pattern::Bands { bands } => bands
                .iter()
                .filter(|b| f >= b.lo() && f <= b.hi())
                .map(|b| b.intensity)
                .sum(),
            Pattern::Transient {
                onset_sharpness,
                broadband_intensity,
            } => {
                let mid = len as f64 / 2.0;
                broadband_intensity / (1.0 + (onset_sharpness * (u as f64 - mid)).exp())
            }
        }
    }

    pub fn bands(&self) -> &[Band] {
        match self {
            Pattern::Bands { bands } => bands,
            _ => &[],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassSpec {
    pub name: String,
    pub pattern: Pattern,
    pub segment_min: usize,
    pub segment_max: usize,
}

impl ClassSpec {
    fn validate(&self, bins: usize) -> Result<()> {
        if self.segment_min == 0 || self.segment_min > self.segment_max {
            return Err(Error::Config(format!(
                "class {}: segment length range {}..={} is invalid",
                self.name, self.segment_min, self.segment_max
            )));
        }
        match &self.pattern {
            Pattern::Silence => Err(Error::Config(format!(
                "class {}: silence is reserved",
                self.name
            ))),
            Pattern::Bands { bands } => {
                for b in bands {
                    if b.width > b.center || b.center + b.width >= bins {
                        return Err(Error::Config(format!(
                            "class {}: band {}±{} outside 0..{bins}",
                            self.name, b.center, b.width
                        )));
                    }
                    if !b.intensity.is_finite() {
                        return Err(Error::Config(format!(
                            "class {}: non-finite intensity",
                            self.name
                        )));
                    }
                }
                Ok(())
            }
            Pattern::Transient {
                onset_sharpness,
                broadband_intensity,
            } => {
                if onset_sharpness.is_finite() && broadband_intensity.is_finite() {
                    Ok(())
                } else {
                    Err(Error::Config(format!(
                        "class {}: non-finite transient parameters",
                        self.name
                    )))
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerateConfig {
    pub classes: Vec<ClassSpec>,
    pub examples: usize,
    pub bins: usize,
    pub frames: usize,
    pub noise_std: f64,
    pub seed: u64,
    /// Probability that a segment is silence rather than a class.
    #[serde(default)]
    pub silence_prob: f64,
    #[serde(default = "default_silence_min")]
    pub silence_min: usize,
    #[serde(default = "default_silence_max")]
    pub silence_max: usize,
}

fn default_silence_min() -> usize {
    3
}

fn default_silence_max() -> usize {
    8
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassInfo {
    pub name: String,
    pub pattern: Pattern,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Example {
    pub id: String,
    /// `bins × frames`
    pub spectrogram: Array2<f64>,
    /// Class index per input frame.
    pub labels: Vec<usize>,
}

impl Example {
    pub fn frames(&self) -> usize {
        self.spectrogram.ncols()
    }
}

/// Per-bin statistics of the raw data, used for z-normalization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormStats {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub bins: usize,
    /// Class table; index 0 is silence.
    pub classes: Vec<ClassInfo>,
    pub examples: Vec<Example>,
    pub stats: NormStats,
}

impl Dataset {
    pub fn num_classes(&self) -> usize {
        self.classes.len()
    }

    pub fn class_name(&self, index: usize) -> &str {
        &self.classes[index].name
    }

    pub fn class_index(&self, name: &str) -> Option<usize> {
        self.classes.iter().position(|c| c.name == name)
    }

    /// Checks label ranges and lengths.
    pub fn validate(&self) -> Result<()> {
        for ex in &self.examples {
            if ex.spectrogram.nrows() != self.bins {
                return Err(Error::Dataset {
                    example: ex.id.clone(),
                    detail: format!("{} bins, expected {}", ex.spectrogram.nrows(), self.bins),
                });
            }
            if ex.labels.len() != ex.frames() {
                return Err(Error::Dataset {
                    example: ex.id.clone(),
                    detail: format!("{} labels for {} frames", ex.labels.len(), ex.frames()),
                });
            }
            if let Some(&bad) = ex.labels.iter().find(|&&c| c >= self.classes.len()) {
                return Err(Error::Dataset {
                    example: ex.id.clone(),
                    detail: format!("label {bad} not in class table"),
                });
            }
        }
        Ok(())
    }
}

pub fn example_id(index: usize) -> String {
    format!("ex{index:04}")
}

/// Builds un-normalized examples; example `e` draws from stream `e` of the
/// master seed, so the result does not depend on scheduling.
pub fn synthesize_examples(config: &GenerateConfig) -> Result<Vec<Example>> {
    if config.classes.is_empty() {
        return Err(Error::Config("at least one class is required".into()));
    }
    if config.bins == 0 || config.frames == 0 {
        return Err(Error::Config("bins and frames must be positive".into()));
    }
    if !(0.0..1.0).contains(&config.silence_prob) {
        return Err(Error::Config("silence_prob must lie in [0, 1)".into()));
    }
    if config.silence_prob > 0.0
        && (config.silence_min == 0 || config.silence_min > config.silence_max)
    {
        return Err(Error::Config("invalid silence length range".into()));
    }
    if !(config.noise_std >= 0.0 && config.noise_std.is_finite()) {
        return Err(Error::Config("noise_std must be finite and >= 0".into()));
    }
    for class in &config.classes {
        class.validate(config.bins)?;
    }
    let noise = Normal::new(0.0, config.noise_std).expect("validated std");
    let examples = (0..config.examples)
        .into_par_iter()
        .map(|e| {
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
            rng.set_stream(e as u64);
            synthesize_one(config, &noise, &mut rng, e)
        })
        .collect();
    Ok(examples)
}

fn synthesize_one(
    config: &GenerateConfig,
    noise: &Normal<f64>,
    rng: &mut ChaCha8Rng,
    index: usize,
) -> Example {
    let mut spectrogram = Array2::<f64>::zeros((config.bins, config.frames));
    let mut labels = Vec::with_capacity(config.frames);
    while labels.len() < config.frames {
        let silent = config.silence_prob > 0.0 && rng.random_bool(config.silence_prob);
        let (label, pattern, len) = if silent {
            let len = rng.random_range(config.silence_min..=config.silence_max);
            (SILENCE, &Pattern::Silence, len)
        } else {
            let c = rng.random_range(0..config.classes.len());
            let class = &config.classes[c];
            let len = rng.random_range(class.segment_min..=class.segment_max);
            (c + 1, &class.pattern, len)
        };
        let start = labels.len();
        let end = (start + len).min(config.frames);
        for t in start..end {
            for f in 0..config.bins {
                spectrogram[[f, t]] = pattern.energy(f, t - start, len);
            }
            labels.push(label);
        }
    }
    if config.noise_std > 0.0 {
        spectrogram.mapv_inplace(|v| v + noise.sample(rng));
    }
    Example {
        id: example_id(index),
        spectrogram,
        labels,
    }
}

/// Per-bin mean and population standard deviation over all frames of all
/// examples. Constant bins get a standard deviation of 1.
pub fn compute_stats(examples: &[Example], bins: usize) -> NormStats {
    let mut sum = vec![0.0; bins];
    let mut count = 0usize;
    for ex in examples {
        for (f, row) in ex.spectrogram.rows().into_iter().enumerate() {
            sum[f] += row.sum();
        }
        count += ex.frames();
    }
    let n = count.max(1) as f64;
    let mean: Vec<f64> = sum.iter().map(|s| s / n).collect();
    let mut sq = vec![0.0; bins];
    for ex in examples {
        for (f, row) in ex.spectrogram.rows().into_iter().enumerate() {
            sq[f] += row.iter().map(|v| (v - mean[f]).powi(2)).sum::<f64>();
        }
    }
    let std = sq
        .iter()
        .map(|s| {
            let sd = (s / n).sqrt();
            if sd > 0.0 {
                sd
            } else {
                1.0
            }
        })
        .collect();
    NormStats { mean, std }
}

pub fn normalize(examples: &mut [Example], stats: &NormStats) {
    for ex in examples {
        for (f, mut row) in ex.spectrogram.rows_mut().into_iter().enumerate() {
            row.mapv_inplace(|v| (v - stats.mean[f]) / stats.std[f]);
        }
    }
}

/// Generates a z-normalized dataset.
pub fn generate(config: &GenerateConfig) -> Result<Dataset> {
    let mut examples = synthesize_examples(config)?;
    let stats = compute_stats(&examples, config.bins);
    normalize(&mut examples, &stats);
    let mut classes = vec![ClassInfo {
        name: SILENCE_NAME.to_string(),
        pattern: Pattern::Silence,
    }];
    classes.extend(config.classes.iter().map(|c| ClassInfo {
        name: c.name.clone(),
        pattern: c.pattern.clone(),
    }));
    Ok(Dataset {
        bins: config.bins,
        classes,
        examples,
        stats,
    })
}
