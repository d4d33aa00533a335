use std::path::PathBuf;

use thiserror::Error;

/// Errors surfaced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("malformed json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("label column `{0}` not found")]
    MissingLabel(String),

    #[error("table has no data rows")]
    EmptyTable,

    #[error("column `{0}` has no observed values")]
    EmptyColumn(String),

    #[error("label column `{0}` has missing values")]
    MissingLabelValue(String),

    #[error("need at least two distinct classes, found {0}")]
    SingleClass(usize),

    #[error("class {class} has {count} samples, too few for {what}")]
    ClassTooSmall {
        class: usize,
        count: usize,
        what: &'static str,
    },

    #[error("dimension mismatch: expected {expected} columns, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),

    #[error("schema mismatch: {0}")]
    Schema(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("not enough data: {0}")]
    InsufficientData(String),

    #[error("matrix is not positive definite")]
    NotPositiveDefinite,
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
