use std::path::PathBuf;

/// Crate-wide error type.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("empty dataset")]
    EmptyDataset,

    #[error("label error: {0}")]
    Labels(String),

    #[error("split fraction {0} outside (0, 1)")]
    InvalidFraction(f64),

    #[error("unknown dataset '{name}'; valid names: {valid}")]
    UnknownDataset { name: String, valid: String },

    #[error("download of {url} failed: {msg}")]
    Download { url: String, msg: String },

    #[error("cannot create cache directory {0}")]
    CacheDir(PathBuf),

    #[error("empty mini-batch")]
    EmptyBatch,

    #[error("empty test set")]
    EmptyTestSet,

    #[error("degenerate curvature probe (|xi''(0)| ~ 0 or non-finite)")]
    DegenerateProbe,

    #[error("step-size estimate must be positive, got {0}")]
    NonPositiveStep(f64),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
