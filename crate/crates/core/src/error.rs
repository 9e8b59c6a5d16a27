use thiserror::Error;

/// Errors produced by the Gaussian-process backends and the evaluation harness.
#[derive(Debug, Error)]
pub enum GpError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("unsupported parameter: {0}")]
    UnsupportedParameter(String),

    /// Cholesky factorization failed even after jitter escalation.
    #[error("factorization failed{}: matrix not positive definite with jitter up to {jitter:e}", node.map(|j| format!(" at node {}", j + 1)).unwrap_or_default())]
    Factorization { node: Option<usize>, jitter: f64 },

    #[error("invalid graph: {0}")]
    Graph(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = GpError> = std::result::Result<T, E>;

pub(crate) fn invalid(msg: impl Into<String>) -> GpError {
    GpError::InvalidArgument(msg.into())
}

pub(crate) fn ensure_finite(values: &[f64], what: &str) -> Result<()> {
    match values.iter().position(|v| !v.is_finite()) {
        Some(i) => Err(invalid(format!("{what}: entry {i} is not finite"))),
        None => Ok(()),
    }
}

pub(crate) fn ensure_len(values: &[f64], expected: usize, what: &str) -> Result<()> {
    if values.len() != expected {
        return Err(invalid(format!(
            "{what}: expected length {expected}, got {}",
            values.len()
        )));
    }
    Ok(())
}
