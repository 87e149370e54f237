//! Gradient-adjusted neuron activation profiles.
//!
//! For every occurrence of a group (a maximal run of one label) the
//! activations and sensitivities of each layer are centered on the frame
//! most relevant to the prediction and cropped to a fixed window. Group
//! means are baseline-subtracted against the mean over all occurrences and
//! multiplied by a `[0, 1]` mask derived from the mean gradient magnitude.

mod accumulate;
mod align;
mod io;
mod occurrences;
mod pipeline;

use ndarray::Array2;

pub use accumulate::{finalize_layer, gradient_mask, LayerSums, MaskMode, NapAccumulator};
pub use align::{
    align_occurrence, best_frame, frame_score, half_width, AlignedWindow, Alignment,
    ChannelReduction,
};
pub use io::{gradnap_file_stem, read_gradnap, read_gradnaps, write_gradnap, GradNapMeta};
pub use occurrences::{find_occurrences, GroupOccurrence};
pub use pipeline::{
    collect_alignments, run_pipeline, ExampleAlignments, GroupProfiles, Grouping, PipelineConfig,
    PipelineOutput, PipelineReport,
};

/// Profile of one group in one layer (layer 0 is the input).
#[derive(Debug, Clone, PartialEq)]
pub struct GradNap {
    pub group: String,
    pub label: usize,
    pub layer: usize,
    /// `C_l × W_l`
    pub values: Array2<f64>,
    pub count: usize,
    pub skipped: usize,
    pub degenerate: bool,
}

impl GradNap {
    pub fn channels(&self) -> usize {
        self.values.nrows()
    }

    pub fn width(&self) -> usize {
        self.values.ncols()
    }
}
