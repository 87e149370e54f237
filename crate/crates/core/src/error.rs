use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("input too short: need at least {needed} frames, got {got}")]
    InputTooShort { needed: usize, got: usize },

    #[error("{what} index {index} out of range (len {len})")]
    Index {
        what: &'static str,
        index: usize,
        len: usize,
    },

    #[error("shape mismatch in layer {layer}: {detail}")]
    ShapeMismatch { layer: usize, detail: String },

    #[error("format error in {path}: {detail}")]
    Format { path: PathBuf, detail: String },

    #[error("unsupported {what} version {found} (expected {expected})")]
    Version {
        what: &'static str,
        found: u32,
        expected: u32,
    },

    #[error("dataset error in {example}: {detail}")]
    Dataset { example: String, detail: String },

    #[error("pipeline error: {0}")]
    Pipeline(String),

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("silhouette undefined for {clusters} clusters over {items} items")]
    UndefinedSilhouette { clusters: usize, items: usize },

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, detail: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            detail: detail.into(),
        }
    }
}
