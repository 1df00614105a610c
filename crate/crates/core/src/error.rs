use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid time distortion: {0}")]
    InvalidDistortion(String),
    #[error("invalid path: {0}")]
    InvalidPath(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("oracle limited to {limit} jumps per path, got {found}")]
    ComplexityGuard { limit: usize, found: usize },
    #[error("horizon {horizon} must lie strictly between N*alpha and (N+1)*alpha for some N >= 1 (alpha = {alpha})")]
    Horizon { horizon: f64, alpha: f64 },
    #[error("step {dt} too coarse: need dt <= {max}")]
    Resolution { dt: f64, max: f64 },
    #[error("invalid parameter {name}: {reason}")]
    Parameter { name: &'static str, reason: String },
    #[error("runaway impulses: more than {limit} before the horizon")]
    Runaway { limit: usize },
    #[error("grid alignment: {0}")]
    Alignment(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("no admissible exponent found for gamma = {gamma}")]
    BoundSearch { gamma: f64 },
    #[error("data error: {0}")]
    Data(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("parse error at line {line}: {reason}")]
    Parse { line: usize, reason: String },
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::Parameter {
            name,
            reason: reason.into(),
        }
    }

    /// True for the failures raised by numerical guards (runaway impulses,
    /// coarse steps, failed bound searches) as opposed to bad user input.
    pub fn is_numerical_guard(&self) -> bool {
        matches!(
            self,
            Error::ComplexityGuard { .. }
                | Error::Resolution { .. }
                | Error::Runaway { .. }
                | Error::BoundSearch { .. }
                | Error::Domain(_)
        )
    }
}
