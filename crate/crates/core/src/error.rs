use thiserror::Error;

/// Failure modes shared by every module in the crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("non-finite input: {0}")]
    NonFinite(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("time step {dt:e} s exceeds the stability limit; need dt <= {required:e} s")]
    StepTooLarge { dt: f64, required: f64 },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("only {available} tail samples after tau_c, need {required}; extend tau_max to at least {required_tau_max:e} s")]
    InsufficientTail {
        available: usize,
        required: usize,
        required_tau_max: f64,
    },

    #[error("numerical failure: {0}")]
    Numerical(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn ensure_finite(name: &str, value: f64) -> Result<f64> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::NonFinite(format!("{name} = {value}")))
    }
}
