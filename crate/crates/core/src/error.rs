use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Caller passed arguments outside an operation's domain.
    #[error("usage error: {0}")]
    Usage(String),

    /// Malformed run or experiment configuration.
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid dataset: {0}")]
    InvalidData(String),

    /// CSV ingestion failure, located at a 1-based data row (header excluded) and column.
    #[error("csv error at row {row}, column '{column}': {message}")]
    Csv {
        row: usize,
        column: String,
        message: String,
    },

    /// A realized rate exceeded its envelope. The invariant measure is no longer
    /// guaranteed, so this is never recovered from.
    #[error("bound violation in dimension {dim} at t={time}: accept ratio {ratio}")]
    BoundViolation { dim: usize, time: f64, ratio: f64 },

    /// Every clock has an infinite arrival time.
    #[error("process frozen: all event clocks have zero rate")]
    ProcessFrozen,

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn usage(msg: impl Into<String>) -> Self {
        Error::Usage(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    /// True for failures that signal a broken sampler invariant rather than bad input.
    pub fn is_invariant_violation(&self) -> bool {
        matches!(self, Error::BoundViolation { .. } | Error::ProcessFrozen)
    }
}
