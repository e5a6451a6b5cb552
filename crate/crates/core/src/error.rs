use thiserror::Error;

/// Every failure the library can report.
#[derive(Debug, Error)]
pub enum ClonerError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("Fock truncation too small: norm deficit {deficit:.3e} exceeds {limit:.1e} at dim {dim}")]
    Truncation { dim: usize, deficit: f64, limit: f64 },

    #[error("unheraldable configuration: success probability is zero")]
    Unheraldable,

    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),

    #[error("insufficient samples: {0}")]
    InsufficientSamples(String),

    #[error("degenerate sample set: {0}")]
    DegenerateSamples(String),

    #[error("quantity not defined for this output: {0}")]
    NotApplicable(&'static str),

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
}

impl ClonerError {
    /// True for failures of the numerics rather than of the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            ClonerError::Truncation { .. }
                | ClonerError::Unheraldable
                | ClonerError::InsufficientSamples(_)
                | ClonerError::DegenerateSamples(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, ClonerError>;

pub(crate) fn invalid(msg: impl Into<String>) -> ClonerError {
    ClonerError::InvalidParameter(msg.into())
}
