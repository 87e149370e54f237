use std::path::Path;

use gradnap_core::data;

use crate::config::DataSection;
use crate::error::CliResult;
use crate::manifest::RunManifest;

/// Generates, normalizes and saves a synthetic dataset.
pub fn generate_data(
    section: &DataSection,
    seed: u64,
    out: &Path,
    manifest: &mut RunManifest,
) -> CliResult<()> {
    let dataset = data::generate(&section.generate_config(seed))?;
    data::save_dataset(out, &dataset)?;
    let frames: usize = dataset.examples.iter().map(|e| e.frames()).sum();
    manifest.counter("examples", dataset.examples.len());
    manifest.counter("frames", frames);
    manifest.counter("classes", dataset.num_classes());
    Ok(())
}
