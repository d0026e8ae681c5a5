use std::io;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("numerical error: {0}")]
    Numerical(String),

    #[error("format error: {0}")]
    Format(String),

    #[error("out-of-vocabulary word: {0:?}")]
    Oov(String),

    #[error("unknown phoneme symbol: {0:?}")]
    Inventory(String),

    #[error("training diverged: {0}")]
    Divergence(String),

    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn numerical(msg: impl Into<String>) -> Self {
        Error::Numerical(msg.into())
    }

    pub(crate) fn format(msg: impl Into<String>) -> Self {
        Error::Format(msg.into())
    }

    /// Wraps a numerical error with extra location context, leaving other kinds untouched.
    pub fn context(self, ctx: impl std::fmt::Display) -> Self {
        match self {
            Error::Numerical(m) => Error::Numerical(format!("{ctx}: {m}")),
            Error::Divergence(m) => Error::Divergence(format!("{ctx}: {m}")),
            other => other,
        }
    }

    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::Numerical(_) | Error::Divergence(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
