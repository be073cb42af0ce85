use thiserror::Error;

/// Errors produced by the simulator, the learning stack and the experiment runner.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {field}: {reason}")]
    Config { field: String, reason: String },

    #[error("coincident positions: angles are undefined")]
    CoincidentPositions,

    #[error("user height {height} m outside the aerial channel model range ({min} m, {max} m]")]
    HeightOutOfRange { height: f64, min: f64, max: f64 },

    #[error("user {user} has an empty serving cluster")]
    EmptyCluster { user: usize },

    #[error("probability {0} must lie strictly inside (0, 1)")]
    ProbabilityOutOfRange(f64),

    #[error("duplicate rate {0} in hypoexponential rate set; jitter the rates before evaluating")]
    DuplicateRates(f64),

    #[error("invalid rate {0}: rates must be finite and positive")]
    InvalidRate(f64),

    #[error("shape mismatch: expected {expected}, got {got}")]
    Shape { expected: usize, got: usize },

    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),

    #[error("step ordering violated: {0}")]
    Ordering(&'static str),

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn config(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            reason: reason.into(),
        }
    }
}
