use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("mode index {index} out of range for {modes} mode(s)")]
    IndexOutOfRange { index: usize, modes: usize },

    #[error("gain {gain:e} is indistinguishable from zero (threshold {threshold:e})")]
    ZeroGain { gain: f64, threshold: f64 },

    #[error("singular operating point: {0}")]
    SingularOperatingPoint(String),

    #[error("precondition violated: {0}")]
    PreconditionViolation(String),

    #[error(
        "truncation overflow at step {step} ({element}): norm deficit {deficit:e} exceeds {tolerance:e}"
    )]
    TruncationOverflow {
        step: usize,
        element: String,
        deficit: f64,
        tolerance: f64,
    },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
