use thiserror::Error;

pub type Result<T> = std::result::Result<T, StnsError>;

#[derive(Debug, Error)]
pub enum StnsError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("spectrum is not Hermitian-symmetric: max defect {defect:e} exceeds {tolerance:e}")]
    SymmetryViolation { defect: f64, tolerance: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("grid mismatch between operands")]
    GridMismatch,

    #[error("integration fault at t = {t}: {reason}")]
    IntegrationFault {
        t: f64,
        reason: String,
        /// Last state that passed the finiteness check.
        snapshot: Box<crate::spectral::SpectralVectorField>,
        snapshot_t: f64,
    },

    #[error("empty record series")]
    EmptySeries,

    #[error("solver state already stopped at t = {0}")]
    AlreadyStopped(f64),
}

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> StnsError {
    StnsError::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
