//! Gradient-adjusted neuron activation profiles (GradNAPs) for 1D
//! fully-convolutional networks.
//!
//! The crate is organised bottom-up:
//!
//! * [`netcore`]: valid 1D convolutions, reverse-mode gradients, receptive
//!   field arithmetic and Adam.
//! * [`model`]: frame-wise prediction, weight files and a toy trainer.
//! * [`data`]: synthetic spectrogram datasets with known spectral ground truth.
//! * [`gradnap`]: alignment, averaging, baseline subtraction and gradient
//!   masking of per-layer responses.
//! * [`respviz`]: neuron responsiveness, optimal-input synthesis and
//!   action-potential series.
//! * [`clustering`]: complete-linkage clustering and Silhouette summaries.
//! * [`plot`]: minimal SVG writers for the exported figure data.

pub mod clustering;
pub mod data;
mod error;
pub mod export;
pub mod gradnap;
pub mod model;
pub mod netcore;
pub mod plot;
pub mod presets;
pub mod respviz;

pub use error::{Error, Result};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
