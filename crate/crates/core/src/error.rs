use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {op}: expected {expected}, got {got}")]
    DimensionMismatch {
        op: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("non-finite value at index {index}")]
    NonFinite { index: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("degenerate pivot: {0}")]
    DegeneratePivot(&'static str),

    #[error("matrix must be square, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },

    #[error("inconclusive after {iterations} iterations at radius {radius:.6e} (gap {gap:.6e}, |c| {c_norm:.6e})")]
    Inconclusive {
        iterations: u64,
        radius: f64,
        gap: f64,
        c_norm: f64,
        x: Vec<f64>,
    },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("matrix market parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("json: {0}")]
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
