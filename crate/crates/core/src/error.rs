use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown task {0:?}")]
    UnknownTask(String),
    #[error("unknown dataset {0:?}")]
    UnknownDataset(String),
    #[error("unknown adapter {0:?}")]
    UnknownAdapter(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {source}")]
    JsonlLine {
        line: usize,
        #[source]
        source: serde_json::Error,
    },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error("invalid record {id}: {reason}")]
    InvalidRecord { id: String, reason: String },
    #[error("invalid manifest: {0}")]
    Manifest(String),

    #[error("dataset too small to split ({0} instances)")]
    TooSmallToSplit(usize),
    #[error("empty class {0:?}")]
    EmptyClass(String),
    #[error("class {class:?} needs {needed} instances but only {available} are available (shortfall {})", needed - available)]
    Shortfall { class: String, needed: u64, available: u64 },
    #[error("cell ({class:?}, {dataset}) in {split} needs {needed} instances, population is {available}")]
    InfeasibleCell {
        split: String,
        class: String,
        dataset: String,
        needed: u64,
        available: u64,
    },

    #[error("missing input {key:?} for {task} instance {id}")]
    MissingInput { task: String, id: String, key: String },
    #[error("few-shot bundle is for {bundle}, instance is {instance}")]
    BundleMismatch { bundle: String, instance: String },
    #[error("no training instance with label {0:?}")]
    MissingLabel(String),
    #[error("template error: {0}")]
    Template(String),

    #[error("prediction/gold id mismatch: {0}")]
    IdMismatch(String),
    #[error("nothing to report")]
    EmptyReport,

    #[error("checkpoint format error: {0}")]
    Format(String),
    #[error("unsupported dtype {0:?}")]
    UnsupportedDtype(String),
    #[error("tensor mismatch: {}", .0.join(", "))]
    TensorMismatch(Vec<String>),
    #[error("invalid parameter: {0}")]
    InvalidParam(String),
    #[error("unknown preset {0:?}")]
    UnknownPreset(String),
    #[error("empty score table")]
    EmptyScores,

    #[error("invalid config: {0}")]
    Config(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
