use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{
    align_occurrence, finalize_layer, find_occurrences, half_width, Alignment, ChannelReduction,
    GradNap, GroupOccurrence, MaskMode, NapAccumulator,
};
use crate::data::{Dataset, SILENCE};
use crate::model::{output_labels, PredictionTrack};
use crate::netcore::{
    backward_target, forward, receptive_fields, ArchitectureSpec, ModelWeights, Target, TargetMode,
};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Grouping {
    #[default]
    #[serde(rename = "predicted")]
    ByPredicted,
    #[serde(rename = "true")]
    ByTrueLabel,
}

impl Grouping {
    pub fn as_str(self) -> &'static str {
        match self {
            Grouping::ByPredicted => "predicted",
            Grouping::ByTrueLabel => "true",
        }
    }
}

impl std::str::FromStr for Grouping {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "predicted" => Ok(Grouping::ByPredicted),
            "true" | "true_label" => Ok(Grouping::ByTrueLabel),
            other => Err(Error::Config(format!(
                "unknown grouping `{other}` (expected `predicted` or `true`)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub grouping: Grouping,
    /// Window width in input frames; defaults to the network's receptive field.
    pub window_input: Option<usize>,
    pub mask: MaskMode,
    pub reduction: ChannelReduction,
    pub target: TargetMode,
    pub include_silence: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            grouping: Grouping::ByPredicted,
            window_input: None,
            mask: MaskMode::AbsMax,
            reduction: ChannelReduction::Sum,
            target: TargetMode::Logit,
            include_silence: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExampleAlignments {
    pub example: usize,
    pub occurrences: Vec<(GroupOccurrence, Alignment)>,
}

/// All profiles of one group, input layer first.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupProfiles {
    pub label: usize,
    pub name: String,
    pub count: usize,
    pub skipped: usize,
    pub naps: Vec<GradNap>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PipelineReport {
    pub occurrences: usize,
    pub aligned: usize,
    pub skipped_boundary: usize,
    /// Groups that had occurrences but none survived alignment.
    pub skipped_groups: Vec<String>,
    /// `(group, layer)` pairs whose gradient mask was all zero.
    pub degenerate: Vec<(String, usize)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineOutput {
    pub window_input: usize,
    /// `W_l` for layers `0..=L`.
    pub widths: Vec<usize>,
    pub groups: Vec<GroupProfiles>,
    pub report: PipelineReport,
}

impl PipelineOutput {
    pub fn group(&self, name: &str) -> Option<&GroupProfiles> {
        self.groups.iter().find(|g| g.name == name)
    }
}

fn window_input(spec: &ArchitectureSpec, config: &PipelineConfig) -> Result<usize> {
    let fields = receptive_fields(spec);
    let w = config
        .window_input
        .unwrap_or(fields[spec.num_layers()].size);
    if w == 0 {
        return Err(Error::Config("window_input must be positive".into()));
    }
    Ok(w | 1)
}

/// Forward, backward and alignment for every occurrence of every example.
pub fn collect_alignments(
    spec: &ArchitectureSpec,
    weights: &ModelWeights,
    dataset: &Dataset,
    config: &PipelineConfig,
) -> Result<Vec<ExampleAlignments>> {
    if dataset.bins != spec.input_bins {
        return Err(Error::Config(format!(
            "dataset has {} bins, model expects {}",
            dataset.bins, spec.input_bins
        )));
    }
    if dataset.num_classes() != spec.num_classes() {
        return Err(Error::Config(format!(
            "dataset has {} classes, model predicts {}",
            dataset.num_classes(),
            spec.num_classes()
        )));
    }
    let window = window_input(spec, config)?;
    dataset
        .examples
        .par_iter()
        .enumerate()
        .map(|(index, example)| {
            let trace = forward(spec, weights, example.spectrogram.view())?;
            let track = PredictionTrack::from_logits(
                trace.logits().to_owned(),
                trace.field(spec.num_layers()),
            );
            let labels = match config.grouping {
                Grouping::ByPredicted => track.classes.clone(),
                Grouping::ByTrueLabel => output_labels(track.field, &example.labels, track.len()),
            };
            let mut occurrences = Vec::new();
            for occ in find_occurrences(index, &labels, track.logits.view(), &track.classes) {
                if occ.label == SILENCE && !config.include_silence {
                    continue;
                }
                let target = Target {
                    class_index: occ.target_class,
                    output_frame: occ.output_frame,
                };
                let sens = backward_target(spec, weights, &trace, target, config.target)?;
                let alignment = align_occurrence(spec, &trace, &sens, window, config.reduction)?;
                occurrences.push((occ, alignment));
            }
            Ok(ExampleAlignments {
                example: index,
                occurrences,
            })
        })
        .collect()
}

/// Computes profiles for every group and layer. Accumulation happens in
/// example order so results are bit-identical regardless of thread count.
pub fn run_pipeline(
    spec: &ArchitectureSpec,
    weights: &ModelWeights,
    dataset: &Dataset,
    config: &PipelineConfig,
) -> Result<PipelineOutput> {
    let window = window_input(spec, config)?;
    let fields = receptive_fields(spec);
    let shapes: Vec<(usize, usize)> = fields
        .iter()
        .enumerate()
        .map(|(l, f)| {
            (
                spec.channels(l),
                2 * half_width(window, f.stride_product) + 1,
            )
        })
        .collect();
    let alignments = collect_alignments(spec, weights, dataset, config)?;

    let mut report = PipelineReport::default();
    let mut groups: BTreeMap<usize, NapAccumulator> = BTreeMap::new();
    let mut skipped: BTreeMap<usize, usize> = BTreeMap::new();
    let mut baseline = NapAccumulator::new(&shapes);
    for example in &alignments {
        for (occ, alignment) in &example.occurrences {
            report.occurrences += 1;
            match alignment {
                Alignment::Aligned(windows) => {
                    report.aligned += 1;
                    groups
                        .entry(occ.label)
                        .or_insert_with(|| NapAccumulator::new(&shapes))
                        .accumulate(windows)?;
                    baseline.accumulate(windows)?;
                }
                Alignment::Skipped { .. } => {
                    report.skipped_boundary += 1;
                    *skipped.entry(occ.label).or_default() += 1;
                }
            }
        }
    }
    for label in skipped.keys() {
        if !groups.contains_key(label) {
            report
                .skipped_groups
                .push(dataset.class_name(*label).to_string());
        }
    }

    let mut profiles = Vec::with_capacity(groups.len());
    for (label, acc) in &groups {
        let name = dataset.class_name(*label).to_string();
        let group_skipped = skipped.get(label).copied().unwrap_or(0);
        let mut naps = Vec::with_capacity(shapes.len());
        for (layer, (sums, base)) in acc.layers.iter().zip(&baseline.layers).enumerate() {
            let (values, degenerate) = finalize_layer(sums, base, config.mask)?;
            if degenerate {
                report.degenerate.push((name.clone(), layer));
            }
            naps.push(GradNap {
                group: name.clone(),
                label: *label,
                layer,
                values,
                count: sums.count,
                skipped: group_skipped,
                degenerate,
            });
        }
        profiles.push(GroupProfiles {
            label: *label,
            name,
            count: acc.count(),
            skipped: group_skipped,
            naps,
        });
    }
    Ok(PipelineOutput {
        window_input: window,
        widths: shapes.iter().map(|s| s.1).collect(),
        groups: profiles,
        report,
    })
}
