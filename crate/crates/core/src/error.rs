use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("matrix `{name}` is singular (pivot {pivot:e} at column {column})")]
    SingularMatrix {
        name: String,
        column: usize,
        pivot: f64,
    },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("no convergence: {0}")]
    NonConvergence(String),

    #[error("boosting round {round} aborted: {reason}")]
    RoundAborted { round: usize, reason: String },

    #[error("parse error at row {row}, column `{column}`: {message}")]
    Parse {
        row: usize,
        column: String,
        message: String,
    },

    #[error("model format error at line {line}: {message}")]
    Format { line: usize, message: String },

    #[error("csv error in {path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
