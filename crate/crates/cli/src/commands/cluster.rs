use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use gradnap_core::clustering::{
    layer_silhouette_summary, newick, write_membership_csv, write_silhouette_csv,
    write_silhouette_json, Normalization, SilhouetteReport,
};
use gradnap_core::gradnap::GradNap;
use gradnap_core::plot::{line_plot, Line};
use ndarray::Array2;

use super::write_text;
use crate::error::CliResult;
use crate::manifest::RunManifest;

#[derive(Debug, Clone, PartialEq)]
pub enum ClusterOutcome {
    Report {
        report: SilhouetteReport,
        /// Layers left out because some group lacks a profile there.
        missing_layers: Vec<usize>,
    },
    /// Fewer than two groups; nothing to cluster.
    Skipped { groups: usize },
}

pub fn silhouette_svg(report: &SilhouetteReport) -> String {
    let points: Vec<Vec<(f64, f64)>> = report
        .layers
        .iter()
        .map(|l| {
            l.rows
                .iter()
                .filter_map(|r| r.score.map(|s| (r.percentile, s)))
                .collect()
        })
        .collect();
    let lines: Vec<Line> = report
        .layers
        .iter()
        .zip(&points)
        .map(|(l, p)| Line {
            points: p,
            highlight: Some(l.layer),
            label: format!("layer {}", l.layer),
        })
        .collect();
    line_plot(
        &format!("silhouette by threshold ({})", report.grouping),
        &lines,
    )
}

/// Clusters the group profiles of every complete layer and writes the
/// silhouette report, dendrograms and membership tables.
pub fn cluster_profiles(
    naps: &[GradNap],
    expected_layers: Option<usize>,
    grouping: &str,
    normalization: Normalization,
    out: &Path,
    manifest: &mut RunManifest,
) -> CliResult<ClusterOutcome> {
    let mut groups: BTreeMap<usize, String> = BTreeMap::new();
    let mut by_layer: BTreeMap<usize, BTreeMap<usize, &Array2<f64>>> = BTreeMap::new();
    for nap in naps {
        groups.insert(nap.label, nap.group.clone());
        by_layer
            .entry(nap.layer)
            .or_default()
            .insert(nap.label, &nap.values);
    }
    if groups.len() < 2 {
        manifest.warnings.push(format!(
            "{grouping}: {} group(s), clustering skipped",
            groups.len()
        ));
        write_text(
            &out.join(format!("silhouette_{grouping}.skipped")),
            &format!(
                "clustering needs at least 2 groups, found {}\n",
                groups.len()
            ),
        )?;
        return Ok(ClusterOutcome::Skipped {
            groups: groups.len(),
        });
    }
    let expected: BTreeSet<usize> = groups.keys().copied().collect();
    let count = expected_layers.unwrap_or(by_layer.keys().max().map_or(0, |m| m + 1));
    let mut missing_layers = Vec::new();
    let mut layers = Vec::new();
    let mut layer_ids = Vec::new();
    for l in 0..count {
        match by_layer.get(&l) {
            Some(m) if m.keys().copied().collect::<BTreeSet<_>>() == expected => {
                layers.push(m.values().copied().collect::<Vec<_>>());
                layer_ids.push(l);
            }
            _ => missing_layers.push(l),
        }
    }
    let labels: Vec<String> = groups.values().cloned().collect();
    let mut analysis = layer_silhouette_summary(&labels, &layers, normalization)?;
    for (lc, &l) in analysis.layers.iter_mut().zip(&layer_ids) {
        lc.layer = l;
    }
    let report = analysis.report(grouping);
    write_silhouette_csv(&out.join(format!("silhouette_{grouping}.csv")), &report)?;
    write_silhouette_json(&out.join(format!("silhouette_{grouping}.json")), &report)?;
    write_text(
        &out.join(format!("silhouette_{grouping}.svg")),
        &silhouette_svg(&report),
    )?;
    for lc in &analysis.layers {
        write_text(
            &out.join(format!("dendrogram_{grouping}_layer{}.nwk", lc.layer)),
            &(newick(&lc.tree, &labels) + "\n"),
        )?;
        write_membership_csv(
            &out.join(format!("membership_{grouping}_layer{}.csv", lc.layer)),
            &labels,
            lc,
        )?;
    }
    for l in report.degenerate_layers() {
        manifest.warnings.push(format!(
            "{grouping}: layer {l} has no defined silhouette score"
        ));
    }
    if !missing_layers.is_empty() {
        manifest.warnings.push(format!(
            "{grouping}: layers {missing_layers:?} incomplete, left out of clustering"
        ));
    }
    manifest.counter(&format!("{grouping}_clustered_layers"), report.layers.len());
    Ok(ClusterOutcome::Report {
        report,
        missing_layers,
    })
}
