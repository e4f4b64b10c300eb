//! Error types shared across the library.

use std::fmt;
use thiserror::Error;

/// Which vocabulary a word was looked up in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Source,
    Target,
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Side::Source => write!(f, "source"),
            Side::Target => write!(f, "target"),
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    /// Malformed input file; `line` is 1-based.
    #[error("{path}:{line}: {msg}")]
    Parse {
        path: String,
        line: usize,
        msg: String,
    },

    #[error("word `{word}` not found in {side} vocabulary")]
    UnknownWord { word: String, side: Side },

    #[error("zero-norm vector for word `{0}`")]
    ZeroNorm(String),

    #[error("dimension mismatch: {left} vs {right}")]
    DimMismatch { left: usize, right: usize },

    /// A precondition or config invariant was violated. `what` names the
    /// offending field or argument.
    #[error("invalid {what}: {msg}")]
    Invalid { what: &'static str, msg: String },

    #[error("external scorer process failed: {0}")]
    ScorerExit(String),

    /// Malformed or out-of-range score on a 1-based output line.
    #[error("external scorer output line {line}: {msg}")]
    ScorerValue { line: usize, msg: String },

    #[error("external scorer returned {got} scores for {expected} pairs")]
    ScorerCount { expected: usize, got: usize },

    #[error("non-finite loss at epoch {epoch}, batch {batch}: {msg}")]
    NonFiniteLoss {
        epoch: usize,
        batch: usize,
        msg: String,
    },
}

impl Error {
    pub(crate) fn invalid(what: &'static str, msg: impl Into<String>) -> Self {
        Error::Invalid {
            what,
            msg: msg.into(),
        }
    }

    pub(crate) fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<String>, line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            msg: msg.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
