use thiserror::Error;

/// Errors raised by the estimation pipeline.
///
/// Every message is prefixed with the `module::operation` that produced it so
/// that a failure surfaced by the command-line front end can be traced back
/// without a backtrace.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("{op}: {msg}")]
    Data { op: &'static str, msg: String },

    #[error("{op}: missing value in column `{column}` at row {row}")]
    MissingValue {
        op: &'static str,
        column: String,
        row: usize,
    },

    #[error("{op}: group `{group}` is empty")]
    EmptyGroup { op: &'static str, group: &'static str },

    #[error("{op}: dimension mismatch ({msg})")]
    Dimension { op: &'static str, msg: String },

    #[error("{op}: design matrix is rank deficient (column `{column}`)")]
    RankDeficient { op: &'static str, column: String },

    #[error("{op}: all weights are zero")]
    ZeroWeights { op: &'static str },

    #[error("{op}: complete or quasi-complete separation (|coefficient| > {limit})")]
    Separation { op: &'static str, limit: f64 },

    #[error("{op}: {msg}")]
    Estimation { op: &'static str, msg: String },

    #[error("{op}: {failed} of {total} replicates failed (limit {limit_pct}%)")]
    TooManyFailures {
        op: &'static str,
        failed: usize,
        total: usize,
        limit_pct: u32,
    },

    #[error("{op}: invalid configuration: {msg}")]
    Config { op: &'static str, msg: String },

    #[error("{op}: io error: {msg}")]
    Io { op: &'static str, msg: String },
}

impl Error {
    pub(crate) fn data(op: &'static str, msg: impl Into<String>) -> Self {
        Error::Data { op, msg: msg.into() }
    }

    pub(crate) fn dim(op: &'static str, msg: impl Into<String>) -> Self {
        Error::Dimension { op, msg: msg.into() }
    }

    pub(crate) fn estimation(op: &'static str, msg: impl Into<String>) -> Self {
        Error::Estimation { op, msg: msg.into() }
    }

    pub(crate) fn config(op: &'static str, msg: impl Into<String>) -> Self {
        Error::Config { op, msg: msg.into() }
    }

    pub(crate) fn io(op: &'static str, err: impl std::fmt::Display) -> Self {
        Error::Io {
            op,
            msg: err.to_string(),
        }
    }

    /// True for errors caused by an invalid configuration rather than by
    /// the data or the estimators.
    pub fn is_validation(&self) -> bool {
        matches!(self, Error::Config { .. })
    }
}

pub type Result<T> = std::result::Result<T, Error>;
