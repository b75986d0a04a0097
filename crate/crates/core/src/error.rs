use thiserror::Error;

/// Errors raised by the factorization toolkit.
#[derive(Debug, Error)]
pub enum NmfError {
    #[error("shape mismatch in {op}: expected {expected}, got {got}")]
    Shape {
        op: &'static str,
        expected: String,
        got: String,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("{role} matrix has invalid entry {value} at row {row}, col {col}")]
    InvalidEntry {
        role: &'static str,
        row: usize,
        col: usize,
        value: f64,
    },

    #[error("zero matrix has no usable spectral norm for step sizes")]
    ZeroMatrix,

    #[error("spectral norm did not converge after {iterations} iterations (best estimate {estimate})")]
    SpectralNotConverged { iterations: usize, estimate: f64 },

    #[error("KL undefined: model value {model} <= 0 where data value {data} > 0 (row {row}, col {col})")]
    KlUndefined {
        row: usize,
        col: usize,
        data: f64,
        model: f64,
    },

    #[error("dual iterate outside domain: y = {value} >= 0 where a > 0 (row {row}, col {col})")]
    DualOutsideDomain { row: usize, col: usize, value: f64 },

    #[error("no informative dual point: dual iterate is identically zero")]
    ZeroDual,

    #[error("fixed factor has a zero column ({col}); the ND problem is degenerate")]
    ZeroFactorColumn { col: usize },

    #[error("empty data column {col}: step size undefined")]
    EmptyDataColumn { col: usize },

    #[error("degenerate factor column {col}: column sum is zero")]
    DegenerateColumn { col: usize },

    #[error("non-finite iterate at iteration {iteration} in {stage}")]
    NonFinite { iteration: usize, stage: &'static str },

    #[error("linear solve failed: {0}")]
    LinearSolve(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("parse error in {path}: {msg}")]
    Parse { path: String, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, NmfError>;

pub(crate) fn shape_err(op: &'static str, expected: (usize, usize), got: (usize, usize)) -> NmfError {
    NmfError::Shape {
        op,
        expected: format!("{}x{}", expected.0, expected.1),
        got: format!("{}x{}", got.0, got.1),
    }
}
