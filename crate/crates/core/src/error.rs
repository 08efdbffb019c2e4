use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Invalid model, system, field or run configuration.
    #[error("configuration error: {0}")]
    Config(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    /// The integrator produced a state that breaks a density-matrix invariant.
    #[error("propagation diverged at step {step} (t = {time} fs): {reason}")]
    Diverged { step: usize, time: f64, reason: String },

    /// A ladder rung whose field component cannot change the yield.
    #[error("no control authority on rung {rung}: F1 = 0")]
    NoControlAuthority { rung: usize },

    #[error("index out of range: {0}")]
    IndexOutOfRange(String),

    #[error("parse error in {what}: {message}")]
    Parse { what: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
}
