use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A parameter is outside its allowed range.
    #[error("invalid {key}: {message}")]
    Validation { key: String, message: String },

    /// The field picked up a non-finite value.
    #[error("numerical divergence at step {step}")]
    Divergence { step: usize },

    #[error("no transmitted pulse beyond the grating (peak {peak:e}, input peak {input_peak:e})")]
    NoTransmittedPulse { peak: f64, input_peak: f64 },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("zero energy: {0}")]
    ZeroEnergy(String),

    /// Replaying a checkpoint segment did not reproduce the stored end state.
    #[error("checkpoint replay mismatch at step {step} (relative error {rel_err:e})")]
    ReplayMismatch { step: usize, rel_err: f64 },

    #[error("size guard: {0}")]
    SizeGuard(String),

    #[error("config parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(key: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Validation {
            key: key.into(),
            message: message.into(),
        }
    }
}
