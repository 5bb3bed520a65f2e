use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot read {path}: {source}")]
    UnreadableFile {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed record in {path}: {reason}")]
    MalformedRecord { path: PathBuf, reason: String },
    #[error("no pose available for frame {frame_id}")]
    MissingPose { frame_id: usize },
    #[error("empty input: {0}")]
    EmptyInput(&'static str),
    #[error("revisit split produced no query frames (radius {radius_m} m)")]
    NoRevisitsFound { radius_m: f64 },
    #[error("unknown recording label {0}")]
    UnknownRecordingLabel(usize),
    #[error("no anchor admits a full training tuple: {0}")]
    InsufficientCandidates(String),
    #[error("point at the origin has no direction")]
    OriginPoint,
    #[error("bad grid shape: expected {expected} samples, got {actual}")]
    BadGridShape { expected: usize, actual: usize },
    #[error("bandwidth mismatch: {0} vs {1}")]
    BandwidthMismatch(usize, usize),
    #[error("channel mismatch: expected {expected}, got {actual}")]
    ChannelMismatch { expected: usize, actual: usize },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("weights are not initialized for {0}")]
    UninitializedWeights(String),
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("non-finite loss at step {step}")]
    NonFiniteLoss { step: usize },
    #[error("database is empty")]
    EmptyDatabase,
    #[error("descriptor for frame {id} has norm {norm}, expected 1")]
    NotUnitNorm { id: usize, norm: f64 },
    #[error("frame id {0} appears more than once")]
    DuplicateId(usize),
    #[error("frame id {0} is not in the dataset")]
    UnknownFrame(usize),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("archive error: {0}")]
    Archive(String),
}

impl Error {
    pub(crate) fn unreadable(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::UnreadableFile {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn malformed(path: impl Into<PathBuf>, reason: impl Into<String>) -> Self {
        Error::MalformedRecord {
            path: path.into(),
            reason: reason.into(),
        }
    }
}
