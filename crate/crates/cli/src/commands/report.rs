use std::fs;
use std::path::{Path, PathBuf};

use gradnap_core::clustering::{compare_reports, write_comparison_csv, Normalization};
use gradnap_core::data::read_spec_file;
use gradnap_core::gradnap::{gradnap_file_stem, read_gradnaps};
use gradnap_core::plot::heatmap;
use gradnap_core::respviz::{
    action_potentials, responsiveness, top_responsive, write_action_potentials_csv,
};
use serde::{Deserialize, Serialize};

use super::cluster::{cluster_profiles, ClusterOutcome};
use super::featviz::{loss_svg, potentials_svg, FeatVizSummary, FEATVIZ_FILE};
use super::gradnap::{GradNapSummary, SUMMARY_FILE};
use super::{read_json, write_json, write_text};
use crate::error::{io_error, CliResult};
use crate::manifest::RunManifest;

pub const REPORT_FILE: &str = "report.json";
const HIGHLIGHT: usize = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchemeReport {
    pub grouping: String,
    pub source: String,
    pub groups: Vec<String>,
    pub layers_present: Vec<usize>,
    pub missing_layers: Vec<usize>,
    pub clustered: bool,
    /// Per clustered layer: mean silhouette over the defined thresholds.
    pub mean_scores: Vec<(usize, Option<f64>)>,
    pub degenerate_profiles: Vec<(String, usize)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatVizReport {
    pub source: String,
    pub name: String,
    pub layer: usize,
    pub groups: Vec<String>,
    pub loss_decreased: Vec<bool>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ReportSummary {
    pub schemes: Vec<SchemeReport>,
    pub featviz: Vec<FeatVizReport>,
    pub notes: Vec<String>,
}

fn dir_name(dir: &Path) -> String {
    dir.file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| "input".into())
}

fn unique(name: String, taken: &[String]) -> String {
    if !taken.contains(&name) {
        return name;
    }
    (2..)
        .map(|i| format!("{name}_{i}"))
        .find(|n| !taken.contains(n))
        .expect("unbounded")
}

/// Silhouette tables, dendrograms and figures for every profile directory,
/// plus optimal-input figures for every feature-visualization directory.
pub fn build_report(
    gradnap_dirs: &[PathBuf],
    featviz_dirs: &[PathBuf],
    normalization: Normalization,
    out: &Path,
    manifest: &mut RunManifest,
) -> CliResult<ReportSummary> {
    let mut summary = ReportSummary::default();
    let mut reports = Vec::new();
    let mut names: Vec<String> = Vec::new();
    for dir in gradnap_dirs {
        let meta_path = dir.join(SUMMARY_FILE);
        let meta: Option<GradNapSummary> = if meta_path.exists() {
            Some(read_json(&meta_path)?)
        } else {
            None
        };
        let grouping = unique(
            meta.as_ref()
                .map(|m| m.grouping.as_str().to_string())
                .unwrap_or_else(|| dir_name(dir)),
            &names,
        );
        names.push(grouping.clone());
        let naps = read_gradnaps(dir)?;
        let sub = out.join(&grouping);
        fs::create_dir_all(&sub).map_err(|e| io_error(&sub, e))?;

        for nap in &naps {
            let stem = gradnap_file_stem(&nap.group, nap.layer);
            write_text(
                &sub.join(format!("gradnap_{stem}.svg")),
                &heatmap(&format!("{} layer {}", nap.group, nap.layer), &nap.values),
            )?;
            let r = responsiveness(&nap.values);
            let top = top_responsive(&r, HIGHLIGHT.min(r.len()))?;
            let ap = action_potentials(nap, &top);
            write_action_potentials_csv(&sub.join(format!("{stem}_potentials.csv")), &ap)?;
            write_text(
                &sub.join(format!("{stem}_potentials.svg")),
                &potentials_svg(&ap),
            )?;
        }

        let expected = meta.as_ref().map(|m| m.layers);
        let outcome = cluster_profiles(&naps, expected, &grouping, normalization, &sub, manifest)?;
        let mut groups: Vec<(usize, String)> =
            naps.iter().map(|n| (n.label, n.group.clone())).collect();
        groups.sort();
        groups.dedup();
        let mut layers_present: Vec<usize> = naps.iter().map(|n| n.layer).collect();
        layers_present.sort_unstable();
        layers_present.dedup();
        let degenerate_profiles: Vec<(String, usize)> = naps
            .iter()
            .filter(|n| n.degenerate || n.values.iter().all(|&v| v == 0.0))
            .map(|n| (n.group.clone(), n.layer))
            .collect();
        let (clustered, mean_scores, missing_layers) = match &outcome {
            ClusterOutcome::Report {
                report,
                missing_layers,
            } => (
                true,
                report.layers.iter().map(|l| (l.layer, l.mean)).collect(),
                missing_layers.clone(),
            ),
            ClusterOutcome::Skipped { groups } => {
                summary.notes.push(format!(
                    "{grouping}: {groups} group(s), silhouette report skipped"
                ));
                let missing = expected
                    .map(|n| (0..n).filter(|l| !layers_present.contains(l)).collect())
                    .unwrap_or_default();
                (false, Vec::new(), missing)
            }
        };
        if !degenerate_profiles.is_empty() {
            summary.notes.push(format!(
                "{grouping}: {} of {} profiles are degenerate (all zero)",
                degenerate_profiles.len(),
                naps.len()
            ));
        }
        if !missing_layers.is_empty() {
            summary
                .notes
                .push(format!("{grouping}: missing layers {missing_layers:?}"));
        }
        if let ClusterOutcome::Report { report, .. } = outcome {
            reports.push(report);
        }
        summary.schemes.push(SchemeReport {
            grouping,
            source: dir_name(dir),
            groups: groups.into_iter().map(|g| g.1).collect(),
            layers_present,
            missing_layers,
            clustered,
            mean_scores,
            degenerate_profiles,
        });
    }
    if !reports.is_empty() {
        let refs: Vec<_> = reports.iter().collect();
        write_comparison_csv(
            &out.join("silhouette_comparison.csv"),
            &compare_reports(&refs),
        )?;
    }

    let mut fv_names: Vec<String> = Vec::new();
    for dir in featviz_dirs {
        let fv: FeatVizSummary = read_json(&dir.join(FEATVIZ_FILE))?;
        let name = unique(dir_name(dir), &fv_names);
        fv_names.push(name.clone());
        let base = name.strip_prefix("featviz_").unwrap_or(&name);
        let sub = out.join(format!("featviz_{base}"));
        fs::create_dir_all(&sub).map_err(|e| io_error(&sub, e))?;
        let mut decreased = Vec::new();
        for rec in &fv.results {
            let input = read_spec_file(&dir.join(format!("{}_input.spec", rec.stem)))?;
            write_text(
                &sub.join(format!("{}_input.svg", rec.stem)),
                &heatmap(
                    &format!("optimal input {} layer {}", rec.group, rec.layer),
                    &input,
                ),
            )?;
            write_text(
                &sub.join(format!("{}_loss.svg", rec.stem)),
                &loss_svg(
                    &format!("loss {} layer {}", rec.group, rec.layer),
                    &rec.losses,
                ),
            )?;
            decreased.push(rec.final_loss < rec.initial_loss);
        }
        if decreased.iter().any(|d| !d) {
            summary.notes.push(format!(
                "featviz {name}: loss did not decrease for some groups"
            ));
        }
        summary.featviz.push(FeatVizReport {
            source: dir_name(dir),
            name,
            layer: fv.layer,
            groups: fv.results.iter().map(|r| r.group.clone()).collect(),
            loss_decreased: decreased,
        });
    }
    write_json(&out.join(REPORT_FILE), &summary)?;
    manifest.warnings.extend(summary.notes.iter().cloned());
    manifest.counter("report_schemes", summary.schemes.len());
    Ok(summary)
}
