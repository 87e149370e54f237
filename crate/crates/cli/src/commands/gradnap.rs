use std::path::Path;

use gradnap_core::data::Dataset;
use gradnap_core::gradnap::{
    run_pipeline, write_gradnap, Grouping, PipelineConfig, PipelineReport,
};
use gradnap_core::netcore::{ArchitectureSpec, ModelWeights};
use serde::{Deserialize, Serialize};

use super::write_json;
use crate::error::CliResult;
use crate::manifest::RunManifest;

pub const SUMMARY_FILE: &str = "summary.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupSummary {
    pub name: String,
    pub label: usize,
    pub count: usize,
    pub skipped: usize,
}

/// Written next to the profiles; lets later stages know the grouping and
/// which layers to expect.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradNapSummary {
    pub grouping: Grouping,
    pub config: PipelineConfig,
    pub layers: usize,
    pub window_input: usize,
    pub widths: Vec<usize>,
    pub groups: Vec<GroupSummary>,
    pub report: PipelineReport,
}

pub fn compute_gradnaps(
    spec: &ArchitectureSpec,
    weights: &ModelWeights,
    dataset: &Dataset,
    config: &PipelineConfig,
    out: &Path,
    manifest: &mut RunManifest,
) -> CliResult<GradNapSummary> {
    let output = run_pipeline(spec, weights, dataset, config)?;
    for group in &output.groups {
        for nap in &group.naps {
            write_gradnap(out, nap)?;
        }
    }
    let summary = GradNapSummary {
        grouping: config.grouping,
        config: config.clone(),
        layers: spec.num_layers() + 1,
        window_input: output.window_input,
        widths: output.widths.clone(),
        groups: output
            .groups
            .iter()
            .map(|g| GroupSummary {
                name: g.name.clone(),
                label: g.label,
                count: g.count,
                skipped: g.skipped,
            })
            .collect(),
        report: output.report.clone(),
    };
    write_json(&out.join(SUMMARY_FILE), &summary)?;

    let report = &output.report;
    let key = |k: &str| format!("{}_{k}", config.grouping.as_str());
    manifest.counter(&key("groups"), output.groups.len());
    manifest.counter(&key("occurrences"), report.occurrences);
    manifest.counter(&key("aligned"), report.aligned);
    manifest.counter(&key("skipped_boundary"), report.skipped_boundary);
    manifest.counter(&key("degenerate"), report.degenerate.len());
    manifest.hyper("window_input", output.window_input);
    if report.skipped_boundary > 0 {
        manifest.warnings.push(format!(
            "{}: {} of {} occurrences skipped at sequence edges",
            config.grouping.as_str(),
            report.skipped_boundary,
            report.occurrences
        ));
    }
    for name in &report.skipped_groups {
        manifest.warnings.push(format!(
            "{}: group {name} has no occurrence away from the edges",
            config.grouping.as_str()
        ));
    }
    for (name, layer) in &report.degenerate {
        manifest.warnings.push(format!(
            "{}: group {name} layer {layer} has an all-zero gradient mask",
            config.grouping.as_str()
        ));
    }
    if output.groups.len() == 1 {
        manifest.warnings.push(format!(
            "{}: only one group; it is its own baseline so every profile is zero",
            config.grouping.as_str()
        ));
    }
    Ok(summary)
}
