use thiserror::Error;

#[derive(Debug, Error)]
pub enum CsadError {
    #[error("matrix is not symmetric (max |m - m^T| = {max_abs:e})")]
    Asymmetric { max_abs: f64 },

    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },

    #[error("non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("matrix is not positive definite (non-positive pivot at index {pivot})")]
    NotPositiveDefinite { pivot: usize },

    #[error("singular triangular system (zero diagonal at index {index})")]
    Singular { index: usize },

    #[error("symmetric eigendecomposition did not converge")]
    EigenFailure,

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("ADMM did not converge after {iterations} iterations")]
    NotConverged { iterations: usize },

    #[error("{0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, CsadError>;
