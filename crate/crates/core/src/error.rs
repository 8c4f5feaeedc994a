use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument fell outside the domain of the function.
    #[error("domain error: {0}")]
    Domain(String),

    /// Invalid configuration (unsupported order, inconsistent profile, ...).
    #[error("configuration error: {0}")]
    Config(String),

    #[error("shape mismatch: expected {expected}, got {actual}")]
    Shape { expected: usize, actual: usize },

    /// The requested erasure band would be wider than a decision cell.
    #[error("erasure offset a = {a} exceeds 1 (threshold too large)")]
    ThresholdTooLarge { a: f64 },

    #[error("singular channel: h = 0 cannot be equalized")]
    SingularChannel,

    /// The closed-form BSEC parameters stopped being a valid distribution.
    #[error("BER approximation breaks down: {0}")]
    ApproximationBreakdown(String),

    #[error("threshold undefined: Q-inverse argument {0} is not in (0, 1)")]
    ThresholdUndefined(f64),

    #[error("training diverged at epoch {epoch}: loss is not finite")]
    TrainingDiverged { epoch: usize },

    #[error("invalid state: {0}")]
    State(String),

    #[error("format error at byte {offset}: {message}")]
    Format { offset: u64, message: String },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by files or the environment rather than by
    /// the values supplied.
    pub fn is_io(&self) -> bool {
        matches!(self, Error::Io { .. } | Error::Format { .. })
    }
}
