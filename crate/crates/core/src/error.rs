use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("dimension {0} is too small (need at least 2)")]
    DimensionTooSmall(usize),

    #[error("probabilities are not normalized (sum = {sum})")]
    NotNormalized { sum: f64 },

    #[error("negative probability {value} at index {index}")]
    NegativeProbability { index: usize, value: f64 },

    #[error("displacement does not preserve normalization (sum of dp = {sum})")]
    NotTangent { sum: f64 },

    #[error("matrix is not unitary (residual {residual:e})")]
    NotUnitary { residual: f64 },

    #[error("matrix is not Hermitian (residual {residual:e})")]
    NotHermitian { residual: f64 },

    #[error("frame change violates its constraints (residual {residual:e})")]
    InvalidFrame { residual: f64 },

    #[error("state is on the chart boundary: p[{index}] = {value:e}")]
    BoundaryState { index: usize, value: f64 },

    #[error("trajectory left the interior at t = {t}: p[{index}] = {value:e}")]
    BoundaryCrossing { t: f64, index: usize, value: f64 },

    #[error("implicit step rejected at t = {t} (dt = {dt:e}) after {iterations} iterations")]
    StepRejected { t: f64, dt: f64, iterations: usize },

    #[error("malformed matrix: {0}")]
    Shape(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("output failed: {0}")]
    Output(String),
}

pub type Result<T> = std::result::Result<T, Error>;
