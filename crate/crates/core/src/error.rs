use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed record at line {line}: {reason}")]
    Malformed { line: usize, reason: String },

    #[error("empty {field} at line {line}")]
    EmptyField { field: &'static str, line: usize },

    #[error("{0}: file is empty")]
    EmptyFile(PathBuf),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("source sequence is empty")]
    EmptySource,

    #[error("prefix must start with the sequence-start token")]
    MissingStart,

    #[error("cannot extend an ended hypothesis")]
    ExtendEnded,

    #[error("missing generation for ids: {}", .0.join(", "))]
    MissingGeneration(Vec<String>),

    #[error("empty generation for id {0}")]
    EmptyGeneration(String),

    #[error("exhaustive search over {0} sequences exceeds the budget of {1}")]
    BudgetExceeded(u128, u128),

    #[error("model file {what}: {reason}")]
    ModelFormat { what: &'static str, reason: String },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn model(what: &'static str, reason: impl Into<String>) -> Self {
        Error::ModelFormat { what, reason: reason.into() }
    }

    /// True for errors caused by bad input or configuration rather than a runtime failure.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::Config(_)
                | Error::Malformed { .. }
                | Error::EmptyField { .. }
                | Error::EmptyFile(_)
                | Error::BudgetExceeded(..)
        )
    }
}
