use std::path::PathBuf;

use crate::protocol::Aspect;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch in {op}: {left:?} vs {right:?}")]
    Dimension {
        op: &'static str,
        left: (usize, usize),
        right: (usize, usize),
    },

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("unknown initialization scheme '{0}'")]
    UnknownScheme(String),

    #[error("empty {0}")]
    Empty(&'static str),

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("correlation undefined: {0}")]
    UndefinedCorrelation(String),

    #[error("label index {0} outside 0..=4")]
    LabelOutOfRange(usize),

    #[error("MOS {value} outside declared range [{min}, {max}]")]
    MosOutOfRange { value: f64, min: f64, max: f64 },

    #[error("'{0}' is not one of bad, poor, fair, good, excellent")]
    LabelParse(String),

    #[error("record is missing the {0} MOS")]
    MissingAspectMos(Aspect),

    #[error("format error in {path}: {reason}")]
    Format { path: PathBuf, reason: String },

    #[error("truncated payload in {path}: expected {expected} bytes, found {actual}")]
    Truncated {
        path: PathBuf,
        expected: usize,
        actual: usize,
    },

    #[error("manifest: {0}")]
    Manifest(String),

    #[error("missing fixtures for {count} sample(s), first: {first:?}")]
    MissingFixtures { count: usize, first: Vec<String> },

    #[error("rank-deficient least-squares system")]
    RankDeficient,

    #[error("activation cache missing or stale: {0}")]
    StaleCache(&'static str),

    #[error("unknown ablation variant '{0}'")]
    UnknownVariant(String),

    #[error("training diverged at epoch {epoch}, batch {batch}: loss {loss}")]
    Diverged { epoch: usize, batch: usize, loss: f64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn format(path: impl Into<PathBuf>, reason: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            reason: reason.into(),
        }
    }
}
