use thiserror::Error;

/// Errors raised across the crate.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("matrix is not positive definite (pivot {pivot} at index {index})")]
    NotPositiveDefinite { index: usize, pivot: f64 },

    #[error("grid is not strictly increasing at index {0}")]
    NonMonotonicGrid(usize),

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("conditional score requires a conditioning input")]
    MissingCondition,

    #[error("DSM loss became non-finite at step {step}")]
    NonFiniteLoss { step: usize },

    #[error("Stein denominator too small: {0:e}")]
    DegenerateDenominator(f64),

    /// A learned score anti-aligned with `y` yields `c ≤ 0`; such a model is unusable.
    #[error("Stein calibration factor {0} is not a positive finite number")]
    InvalidCalibration(f64),

    #[error("degenerate sample: {0}")]
    DegenerateSample(String),

    #[error("invalid configuration: {0}")]
    ConfigInvalid(String),

    #[error("checkpoint format error: {0}")]
    Checkpoint(String),

    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
