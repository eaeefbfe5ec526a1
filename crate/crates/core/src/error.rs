use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{op}: dimension mismatch between {left:?} and {right:?}")]
    DimensionMismatch {
        op: &'static str,
        left: (usize, usize),
        right: (usize, usize),
    },

    #[error("{op}: entry ({row}, {col}) = {value} is not a finite non-negative value")]
    InvalidEntry {
        op: &'static str,
        row: usize,
        col: usize,
        value: f64,
    },

    #[error("{op}: index ({row}, {col}) out of bounds for a {rows}x{cols} matrix")]
    OutOfBounds {
        op: &'static str,
        row: usize,
        col: usize,
        rows: usize,
        cols: usize,
    },

    #[error("user graph is asymmetric: |G({i},{j}) - G({j},{i})| = {diff:e} exceeds {tol:e}")]
    Asymmetric { i: usize, j: usize, diff: f64, tol: f64 },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("objective became non-finite ({value}) at sweep {sweep}")]
    NonFinite { sweep: usize, value: f64 },

    #[error("duplicate id `{id}` in {context}")]
    DuplicateId { id: String, context: String },

    #[error("row alignment failed for user `{0}`: no temporal target row")]
    Alignment(String),

    #[error("label sets differ: {0}")]
    LabelMismatch(String),

    #[error("{path}:{line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("inconsistent input: {0}")]
    Inconsistent(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("report serialization: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
