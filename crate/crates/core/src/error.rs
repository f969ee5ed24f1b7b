use thiserror::Error;

/// Error type shared by every module of the crate.
#[derive(Debug, Error)]
pub enum SdeError {
    #[error("dimension error: {0}")]
    Dimension(String),
    #[error("numeric error: {0}")]
    NonFinite(String),
    #[error("svd did not converge after {sweeps} sweeps (off-diagonal residual {residual:e})")]
    Convergence { sweeps: usize, residual: f64 },
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error("range error: {0}")]
    Range(String),
    #[error("contract violation: {0}")]
    Contract(String),
    #[error(
        "singular value gap {gap:e} at index {index} is below {threshold:e}; \
         fall back to finite differences or skip the spectral gradient for this step"
    )]
    SpectralGap { index: usize, gap: f64, threshold: f64 },
    #[error("io error at byte offset {offset}: {source}")]
    Io {
        offset: u64,
        #[source]
        source: std::io::Error,
    },
    #[error("format error at byte offset {offset}: {message}")]
    Format { offset: u64, message: String },
    #[error("config error in `{key}`: {message}")]
    Config { key: String, message: String },
    #[error("training diverged at step {step}: {message}")]
    Training { step: usize, message: String },
}

pub type Result<T, E = SdeError> = std::result::Result<T, E>;

impl SdeError {
    pub(crate) fn dim(msg: impl Into<String>) -> Self {
        SdeError::Dimension(msg.into())
    }

    pub(crate) fn degenerate(msg: impl Into<String>) -> Self {
        SdeError::Degenerate(msg.into())
    }

    pub(crate) fn range(msg: impl Into<String>) -> Self {
        SdeError::Range(msg.into())
    }
}
