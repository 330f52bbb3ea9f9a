use thiserror::Error;

/// Which side of a two-sample computation an error refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    X,
    Y,
}

impl std::fmt::Display for Side {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Side::X => f.write_str("x"),
            Side::Y => f.write_str("y"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RdcError {
    #[error("non-finite value at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("sample size mismatch: x has {x} rows, y has {y} rows")]
    SizeMismatch { x: usize, y: usize },

    #[error("dimension mismatch: expected {expected} columns, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("degenerate scale on side {0}: all subsampled rows are identical, supply an explicit scale")]
    DegenerateScale(Side),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("covariance of side {0} is numerically singular and no ridge was applied")]
    Singular(Side),

    #[error("canonical correlation {value} exceeds 1 beyond tolerance")]
    CorrelationOutOfRange { value: f64 },

    #[error("sample of {n} rows needs {bytes} bytes, over the {budget} byte budget; subsample first")]
    Capacity { n: usize, bytes: u64, budget: u64 },

    #[error("measure `{0}` does not support multivariate inputs")]
    Capability(String),
}

pub type Result<T> = std::result::Result<T, RdcError>;
