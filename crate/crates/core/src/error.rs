use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {op}: {}x{} vs {}x{}", left.0, left.1, right.0, right.1)]
    Dimension { op: &'static str, left: (usize, usize), right: (usize, usize) },

    #[error("training diverged: non-finite gradient in parameter `{param}`")]
    DivergedParam { param: String },

    #[error("training diverged: non-finite loss at batch {batch}")]
    DivergedBatch { batch: usize },

    #[error(transparent)]
    Data(#[from] DataError),

    #[error(transparent)]
    Metric(#[from] MetricError),

    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),

    #[error("augmentation: {0}")]
    Augment(String),

    #[error("completion client: {0}")]
    Client(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}

/// Validation failures while reading or checking dataset content.
#[derive(Debug, Error, PartialEq)]
pub enum DataError {
    #[error("{file}:{line}: malformed record: {message}")]
    Malformed { file: String, line: usize, message: String },

    #[error("{file}:{line}: unknown category `{category}`")]
    UnknownCategory { file: String, line: usize, category: String },

    #[error("{file}:{line}: entity `{id}` has embedding length {found}, expected {expected}")]
    EmbeddingLength { file: String, line: usize, id: String, found: usize, expected: usize },

    #[error("{file}:{line}: duplicate {kind} id `{id}`")]
    DuplicateId { file: String, line: usize, kind: String, id: String },

    #[error("{context}: dangling reference to unknown {kind} `{id}`")]
    Dangling { context: String, kind: String, id: String },

    #[error("{file}:{line}: label must be 0 or 1, got {label}")]
    BadLabel { file: String, line: usize, label: i64 },

    #[error("temporal split violated: latest train timestamp {train_max} >= earliest test timestamp {test_min}")]
    TemporalLeak { train_max: i64, test_min: i64 },

    #[error("unknown ids: {}", ids.join(", "))]
    UnknownIds { ids: Vec<String> },

    #[error("{0}")]
    Invalid(String),
}

#[derive(Debug, Error, PartialEq, Eq, Clone)]
pub enum MetricError {
    #[error("metric `{metric}` is undefined: {reason}")]
    Undefined { metric: &'static str, reason: &'static str },

    #[error("invalid funnel: require pv >= clicks >= applications (got {pv}, {clicks}, {applications})")]
    InvalidFunnel { pv: u64, clicks: u64, applications: u64 },
}

#[derive(Debug, Error, PartialEq)]
pub enum CheckpointError {
    #[error("bad magic bytes {found:?}, expected \"PJF1\"")]
    BadMagic { found: [u8; 4] },

    #[error("unsupported checkpoint format version {0}")]
    UnsupportedVersion(u32),

    #[error("checkpoint truncated while reading {what}")]
    Truncated { what: String },

    #[error("tensor `{name}` has shape {found:?}, expected {expected:?}")]
    ShapeMismatch { name: String, expected: Vec<usize>, found: Vec<usize> },

    #[error("checkpoint is missing tensor `{0}`")]
    MissingTensor(String),

    #[error("checkpoint has unexpected tensor `{0}`")]
    UnexpectedTensor(String),

    #[error("checkpoint config is unreadable: {0}")]
    BadConfig(String),
}
