use thiserror::Error;

/// Failure modes shared by every module of the crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeomError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("point lies outside the domain: {0}")]
    DomainBoundary(String),

    #[error("degenerate metric: {0}")]
    DegenerateMetric(String),

    #[error("sampling failed: {0}")]
    Sampling(String),

    #[error("inconsistent embedding: {0}")]
    InconsistentEmbedding(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("cannot parse `{input}`: {reason}")]
    Parse { input: String, reason: String },
}

pub type Result<T, E = GeomError> = std::result::Result<T, E>;

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(GeomError::DimensionMismatch { expected, got })
    }
}
