use thiserror::Error;

/// Errors raised by network construction, rate evaluation and routing.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter `{field}`: {reason}")]
    Parameter { field: &'static str, reason: String },

    #[error("{what} index {index} out of range (limit {limit})")]
    Index {
        what: &'static str,
        index: usize,
        limit: usize,
    },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("channel matrix is singular")]
    Singular,

    #[error("routing infeasible at stage {stage}: {reason}")]
    Infeasible { stage: usize, reason: String },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("slot {slot} is still in the pipeline warm-up (needs slot > {stages})")]
    WarmUp { slot: usize, stages: usize },

    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn param(field: &'static str, reason: impl Into<String>) -> Error {
    Error::Parameter {
        field,
        reason: reason.into(),
    }
}
