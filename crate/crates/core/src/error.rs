use std::io;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not positive definite")]
    NotPositiveDefinite,

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("objective increased from {previous} to {current} at iteration {iteration}")]
    NonDecreasingObjective {
        iteration: usize,
        previous: f64,
        current: f64,
    },

    #[error("participant {0} missed the round deadline")]
    Timeout(usize),

    #[error("session aborted: {0}")]
    Abort(String),

    #[error("parse error in {file} at row {row}, column {col}: {msg}")]
    Parse {
        file: String,
        row: usize,
        col: usize,
        msg: String,
    },

    #[error("view {view} has {found} rows, expected {expected}")]
    RowCountMismatch {
        view: usize,
        found: usize,
        expected: usize,
    },

    #[error("class {class} has {count} samples, need at least {needed}")]
    ClassTooSmall {
        class: usize,
        count: usize,
        needed: usize,
    },

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("cannot open {path}: {source}")]
    Open { path: String, source: io::Error },

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
