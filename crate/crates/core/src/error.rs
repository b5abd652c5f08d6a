use thiserror::Error;

/// Errors raised across the library.
#[derive(Debug, Error)]
pub enum DemargError {
    /// The Fock cutoff is too small for the requested state or operation.
    #[error("cutoff error: {0}")]
    Cutoff(String),

    /// Input violates a documented precondition or invariant.
    #[error("validation error: {0}")]
    Validation(String),

    /// Data do not cover the range an operation needs (no extrapolation).
    #[error("coverage error: {0}")]
    Coverage(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl DemargError {
    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            DemargError::Cutoff(_) | DemargError::Coverage(_) => 3,
            _ => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, DemargError>;
