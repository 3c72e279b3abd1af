use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Bad configuration value or data file content.
    #[error("configuration error: {0}")]
    Config(String),

    /// Caller violated an operation's preconditions (dimensions, ranges).
    #[error("usage error: {0}")]
    Usage(String),

    /// A gain that must be inverted is zero or too small.
    #[error("invertibility error: {0}")]
    Invertibility(String),

    #[error("estimation error: {0}")]
    Estimation(String),

    /// Training produced a non-finite loss. `log` holds one line per epoch
    /// completed before the failure.
    #[error("training diverged: {reason}")]
    Training { reason: String, log: Vec<String> },

    /// A model or dataset file could not be decoded.
    #[error("failed to load {path}: {reason}")]
    Load { path: PathBuf, reason: String },

    #[error("undefined metric: {0}")]
    UndefinedMetric(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub(crate) fn load(path: impl Into<PathBuf>, reason: impl Into<String>) -> Self {
        Error::Load { path: path.into(), reason: reason.into() }
    }
}
