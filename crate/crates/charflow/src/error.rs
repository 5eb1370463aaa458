use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Crate-wide error type; variants mirror the failure modes of the analyses.
#[derive(Debug, Error)]
pub enum Error {
    #[error("point (t={t}, x={x}) outside the domain rectangle")]
    OutOfDomain { t: f64, x: f64 },

    #[error("value z={z} outside the flux working interval [{lo}, {hi}]")]
    OutOfInterval { z: f64, lo: f64, hi: f64 },

    #[error("dependency-triangle basis at (t={t}, x={x}) has no admissible candidate")]
    WindowEmpty { t: f64, x: f64 },

    #[error("characteristic trace failed: {0}")]
    TraceFailure(String),

    #[error("test function support exits the domain rectangle")]
    SupportOutOfDomain,

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("scenario error at stage {stage}: {message}")]
    Scenario { stage: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Stage tag used by the CLI error object.
    pub fn stage(&self) -> &str {
        match self {
            Error::Scenario { stage, .. } => stage,
            Error::OutOfDomain { .. } => "domain",
            Error::OutOfInterval { .. } => "flux",
            Error::WindowEmpty { .. } => "affine-trace",
            Error::TraceFailure(_) => "trace",
            Error::SupportOutOfDomain => "residual",
            Error::InvalidInput(_) | Error::Precondition(_) => "input",
            Error::Io(_) | Error::Csv(_) => "io",
        }
    }
}
