use thiserror::Error;

/// Errors raised by the numerical routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("time series must contain at least one point")]
    EmptySeries,

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("horizon mismatch: {left} vs {right}")]
    HorizonMismatch { left: usize, right: usize },

    #[error("invalid index order: {0}")]
    IndexOrder(String),

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("exponent p = {p} is outside the supported regime {regime}")]
    WrongRegime { p: f64, regime: &'static str },

    #[error("overflow at step {step}: solution left the finite range")]
    Overflow { step: usize },

    #[error("lift of the driving signal is required in the rough regime")]
    MissingLift,

    #[error("hypothesis violated at ({k}, {l}): lhs {lhs} > rhs {rhs}")]
    Hypothesis { k: usize, l: usize, lhs: f64, rhs: f64 },

    #[error("derivative bounds unavailable: {0}")]
    NoDerivativeBounds(String),

    #[error("unsupported: {0}")]
    Unsupported(String),
}

pub type Result<T> = std::result::Result<T, Error>;
