use thiserror::Error;

/// Errors raised across the movement-primitive, policy and environment layers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("regression failed: {reason} (spatial extent {extent:.3e}, condition estimate {condition:.3e})")]
    FitFailure {
        reason: String,
        extent: f64,
        condition: f64,
    },

    #[error("degenerate rotation axis: |r| = {norm:.3e} with alpha = {alpha:.3e}")]
    DegenerateAxis { norm: f64, alpha: f64 },

    #[error("reward singularity: l2 = {l2:.3e} <= epsilon = {epsilon:.3e}, floor {floor}")]
    RewardSingularity { l2: f64, epsilon: f64, floor: f64 },

    #[error("covariance lost positive definiteness (condition {condition:.3e}); reset required")]
    CovarianceReset { condition: f64 },

    #[error("non-finite gradient in {0}; update aborted")]
    NonFiniteGradient(String),

    #[error("I/O error: {0}")]
    Io(String),

    #[error("format error: {0}")]
    Format(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Format(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Format(e.to_string())
    }
}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
