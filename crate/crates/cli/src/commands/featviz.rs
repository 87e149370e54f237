use std::path::Path;

use gradnap_core::data::write_spec_file;
use gradnap_core::gradnap::{gradnap_file_stem, GradNap};
use gradnap_core::netcore::{receptive_field, ArchitectureSpec, ModelWeights, Sign};
use gradnap_core::plot::{heatmap, line_plot, Line};
use gradnap_core::respviz::{
    action_potentials, optimize_input, responsiveness, top_responsive, write_action_potentials_csv,
    ActionPotentials, FeatVizConfig,
};
use serde::{Deserialize, Serialize};

use super::{write_json, write_series_csv, write_text};
use crate::error::{CliError, CliResult};
use crate::manifest::RunManifest;

pub const FEATVIZ_FILE: &str = "featviz.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatVizRecord {
    pub group: String,
    pub label: usize,
    pub layer: usize,
    pub neurons: Vec<(usize, Sign)>,
    /// `r_n` of the selected neurons, in rank order.
    pub responsiveness: Vec<f64>,
    pub losses: Vec<f64>,
    pub initial_loss: f64,
    pub final_loss: f64,
    /// Bin and frame of the largest input value.
    pub argmax_bin: usize,
    pub argmax_frame: usize,
    pub stem: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatVizSummary {
    pub layer: usize,
    pub top: usize,
    pub receptive_field: usize,
    pub l1: f64,
    pub l2: f64,
    pub config: FeatVizConfig,
    pub results: Vec<FeatVizRecord>,
}

pub fn potentials_svg(ap: &ActionPotentials) -> String {
    let points: Vec<Vec<(f64, f64)>> = ap
        .series
        .iter()
        .map(|s| {
            ap.offsets
                .iter()
                .zip(&s.values)
                .map(|(&o, &v)| (o as f64, v))
                .collect()
        })
        .collect();
    let lines: Vec<Line> = ap
        .series
        .iter()
        .zip(&points)
        .map(|(s, p)| Line {
            points: p,
            highlight: s.highlight,
            label: format!("channel {}", s.channel),
        })
        .collect();
    line_plot(&format!("{} layer {}", ap.group, ap.layer), &lines)
}

pub fn loss_svg(title: &str, losses: &[f64]) -> String {
    let points: Vec<(f64, f64)> = losses
        .iter()
        .enumerate()
        .map(|(i, &l)| (i as f64, l))
        .collect();
    line_plot(
        title,
        &[Line {
            points: &points,
            highlight: Some(0),
            label: "loss".into(),
        }],
    )
}

/// Optimal inputs for the `top` most responsive neurons of `layer` in every
/// group profile, plus the matching action-potential series.
#[allow(clippy::too_many_arguments)]
pub fn feature_visualization(
    spec: &ArchitectureSpec,
    weights: &ModelWeights,
    naps: &[GradNap],
    layer: usize,
    top: usize,
    config: &FeatVizConfig,
    out: &Path,
    manifest: &mut RunManifest,
) -> CliResult<FeatVizSummary> {
    if layer == 0 || layer > spec.num_layers() {
        return Err(CliError::usage(format!(
            "--layer: {layer} is not a hidden layer (1..={})",
            spec.num_layers()
        )));
    }
    if top == 0 || top > spec.channels(layer) {
        return Err(CliError::usage(format!(
            "--top: {top} is outside 1..={} for layer {layer}",
            spec.channels(layer)
        )));
    }
    let profiles: Vec<&GradNap> = naps.iter().filter(|n| n.layer == layer).collect();
    if profiles.is_empty() {
        return Err(CliError::data(format!("no profiles for layer {layer}")));
    }
    let rf = receptive_field(spec, layer)?.size;
    let mut results = Vec::with_capacity(profiles.len());
    for nap in profiles {
        if nap.channels() != spec.channels(layer) {
            return Err(CliError::data(format!(
                "profile {} layer {layer} has {} channels, model has {}",
                nap.group,
                nap.channels(),
                spec.channels(layer)
            )));
        }
        let r = responsiveness(&nap.values);
        let neurons = top_responsive(&r, top)?;
        if neurons.iter().all(|(_, s)| *s == Sign::Zero) {
            manifest.warnings.push(format!(
                "group {} layer {layer}: all responsiveness is zero",
                nap.group
            ));
        }
        let opt = optimize_input(spec, weights, layer, &neurons, config)?;
        let (mut best, mut argmax) = (f64::NEG_INFINITY, (0, 0));
        for (idx, &v) in opt.input.indexed_iter() {
            if v > best {
                best = v;
                argmax = idx;
            }
        }
        let stem = gradnap_file_stem(&nap.group, layer);
        write_spec_file(&out.join(format!("{stem}_input.spec")), &opt.input)?;
        write_series_csv(
            &out.join(format!("{stem}_loss.csv")),
            ["step", "loss"],
            opt.losses.iter().copied().enumerate(),
        )?;
        write_text(
            &out.join(format!("{stem}_input.svg")),
            &heatmap(
                &format!("optimal input {} layer {layer}", nap.group),
                &opt.input,
            ),
        )?;
        let ap = action_potentials(nap, &neurons);
        write_action_potentials_csv(&out.join(format!("{stem}_potentials.csv")), &ap)?;
        write_text(
            &out.join(format!("{stem}_potentials.svg")),
            &potentials_svg(&ap),
        )?;
        results.push(FeatVizRecord {
            group: nap.group.clone(),
            label: nap.label,
            layer,
            responsiveness: neurons.iter().map(|&(n, _)| r[n]).collect(),
            neurons,
            initial_loss: opt.initial_loss(),
            final_loss: opt.final_loss(),
            losses: opt.losses,
            argmax_bin: argmax.0,
            argmax_frame: argmax.1,
            stem,
        });
    }
    let summary = FeatVizSummary {
        layer,
        top,
        receptive_field: rf,
        l1: config.l1(rf),
        l2: config.l2(rf),
        config: config.clone(),
        results,
    };
    write_json(&out.join(FEATVIZ_FILE), &summary)?;

    manifest.hyper("featviz_layer", layer);
    manifest.hyper("featviz_top", top);
    manifest.hyper("featviz_lr", config.lr);
    manifest.hyper("featviz_steps", config.steps);
    manifest.hyper("featviz_init_std", config.init_std);
    manifest.hyper("featviz_l1_scale", config.l1_scale);
    manifest.hyper("featviz_l2_scale", config.l2_scale);
    manifest.hyper("featviz_receptive_field", rf);
    manifest.hyper("featviz_l1", summary.l1);
    manifest.hyper("featviz_l2", summary.l2);
    manifest.counter("featviz_groups", summary.results.len());
    Ok(summary)
}
