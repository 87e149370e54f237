use std::path::Path;

use gradnap_core::data::Dataset;
use gradnap_core::model::{frame_accuracy, save_weights, train_toy, TrainConfig};
use gradnap_core::netcore::ArchitectureSpec;

use super::{write_series_csv, write_text};
use crate::error::CliResult;
use crate::manifest::RunManifest;

pub const WEIGHTS_FILE: &str = "weights.gnw";
pub const ARCH_FILE: &str = "arch.toml";
pub const LOSS_FILE: &str = "train_loss.csv";

/// Trains the network and writes weights, architecture and loss curve.
/// Accuracy is reported for the weights as stored (`f32`).
pub fn train_model(
    spec: &ArchitectureSpec,
    dataset: &Dataset,
    config: &TrainConfig,
    out: &Path,
    manifest: &mut RunManifest,
) -> CliResult<f64> {
    let outcome = train_toy(spec, dataset, config)?;
    let stored = outcome.weights.to_f32_precision();
    let accuracy = frame_accuracy(spec, &stored, dataset)?;
    save_weights(&out.join(WEIGHTS_FILE), spec, &stored)?;
    write_text(&out.join(ARCH_FILE), &spec.to_toml_string())?;
    write_series_csv(
        &out.join(LOSS_FILE),
        ["epoch", "loss"],
        outcome.losses.iter().copied().enumerate(),
    )?;
    manifest.counter("epochs", config.epochs);
    manifest.counter("final_loss", outcome.losses.last().copied());
    manifest.counter("frame_accuracy", accuracy);
    manifest.hyper("train_learning_rate", config.learning_rate);
    manifest.hyper("train_batch_size", config.batch_size);
    Ok(accuracy)
}
