use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("mesh level {0} out of range (expected 0..={max})", max = crate::mesh::MAX_LEVEL)]
    InvalidLevel(i64),

    #[error("boundary side {0:?} has no tag")]
    UntaggedSide(crate::mesh::Side),

    #[error("polynomial degree {0} not supported (expected 1..=3)")]
    InvalidDegree(usize),

    #[error("space mismatch: {0}")]
    SpaceMismatch(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("pressure flux condition covers the whole boundary; div w would be forced to have zero mean")]
    AllFluxBoundary,

    #[error("invalid time step: {0}")]
    InvalidTimeStep(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("singular matrix: no usable pivot at row {row}")]
    SingularMatrix { row: usize },

    #[error("linear solve failed: relative residual {residual:.3e} exceeds {tolerance:.1e}")]
    ResidualTooLarge { residual: f64, tolerance: f64 },

    #[error("factorization failed: {0}")]
    Factorization(String),

    #[error("history is not uniformly stepped: {0}")]
    NonUniformHistory(String),

    #[error("invalid level range: {0}")]
    InvalidLevels(String),
}

pub type Result<T> = std::result::Result<T, Error>;
