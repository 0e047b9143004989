use std::path::PathBuf;

use thiserror::Error;

/// Everything the models, tuner and codesign search can fail with.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("cannot read {path}: {message}")]
    Io { path: PathBuf, message: String },

    #[error("malformed input {path}: {message}")]
    Parse { path: PathBuf, message: String },

    #[error("invalid `{field}`: {message}")]
    Validation { field: String, message: String },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("infeasible tile: {0}")]
    Infeasible(String),

    #[error("no feasible tile configuration in the search space")]
    EmptyFeasibleSpace,

    #[error("no architecture fits the area budget")]
    EmptyDesignSpace,

    #[error("iteration space of {points} points exceeds the brute-force limit of {limit}")]
    Size { points: u64, limit: u64 },

    #[error("anchor set is rank deficient: {0}")]
    Rank(String),

    #[error("fitted coefficient `{name}` is negative ({value})")]
    NegativeCoeff { name: String, value: f64 },
}

impl Error {
    pub(crate) fn validation(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Validation {
            field: field.into(),
            message: message.into(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
