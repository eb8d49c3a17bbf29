use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = OrcaError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum OrcaError {
    #[error("invalid Jacobi parameters alpha={alpha}, beta={beta}: both must exceed -1")]
    InvalidParams { alpha: f64, beta: f64 },

    #[error("truncation degree {0} exceeds the supported maximum of {max}", max = crate::orthopoly::MAX_DEGREE)]
    DegreeTooLarge(usize),

    #[error("input {value} lies outside [-1, 1]")]
    OutOfDomain { value: f64 },

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("training data must contain at least one sample of each label")]
    SingleClassData,

    #[error("label {0} is not one of -1, +1")]
    InvalidLabel(f64),

    #[error("design matrix needs {requested} elements, above the cap of {cap}")]
    BudgetExceeded { requested: u128, cap: u128 },

    #[error("model has zero RKHS norm (all dual coefficients vanish)")]
    DegenerateModel,

    #[error("model has d = {0}; boundary export needs d = 2")]
    NotTwoDimensional(usize),

    #[error("file not found: {}", .0.display())]
    FileNotFound(PathBuf),

    #[error("malformed row {row}: {reason}")]
    MalformedRow { row: usize, reason: String },

    #[error("bad coefficient dump: {0}")]
    BadDump(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
