use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid dimension: {0}")]
    InvalidDimension(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid scenario field `{field}`: {reason}")]
    InvalidScenario { field: &'static str, reason: String },

    #[error("dimension mismatch in {block}: expected {expected}, got {got}")]
    DimensionMismatch {
        block: &'static str,
        expected: String,
        got: String,
    },

    #[error("index {index} out of range for {what} (len {len})")]
    IndexOutOfRange {
        what: &'static str,
        index: usize,
        len: usize,
    },

    #[error("degenerate retraction: {0} block collapsed to zero")]
    DegenerateRetraction(&'static str),

    #[error("line search failed after {0} backtracks")]
    LineSearchFailure(usize),

    #[error("config error: {0}")]
    Config(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("empty table: {0}")]
    EmptyTable(&'static str),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for errors caused by bad user input rather than numerics.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::InvalidDimension(_)
                | Error::Domain(_)
                | Error::InvalidScenario { .. }
                | Error::Config(_)
                | Error::Parse(_)
                | Error::EmptyTable(_)
        )
    }
}
