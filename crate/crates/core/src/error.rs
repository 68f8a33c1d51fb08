use std::path::PathBuf;

use crate::model::ObjectId;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {actual} ({context})")]
    DimensionMismatch {
        expected: usize,
        actual: usize,
        context: &'static str,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("covariance matrix of the {0} modality is numerically singular")]
    SingularCovariance(&'static str),

    #[error("class {0} has no training examples")]
    EmptyClass(usize),

    #[error("label {label} out of range for {class_count} classes")]
    LabelOutOfRange { label: usize, class_count: usize },

    #[error("distance {delta} exceeds the context maximum {delta_max}")]
    DistanceOutOfContext { delta: f64, delta_max: f64 },

    #[error("zero-norm vector has no cosine similarity")]
    ZeroVector,

    #[error("object {0} is already indexed")]
    DuplicateId(ObjectId),

    #[error("object {0} has no semantic vector")]
    MissingSemantic(ObjectId),

    #[error("empty dataset")]
    EmptyDataset,

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("invalid dataset: {0}")]
    InvalidDataset(String),

    #[error("corrupt {kind} file: {message}")]
    Corrupt { kind: &'static str, message: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    RawIo(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn dim(expected: usize, actual: usize, context: &'static str) -> Self {
        Error::DimensionMismatch {
            expected,
            actual,
            context,
        }
    }
}
