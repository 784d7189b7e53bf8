//! Error type shared by all core modules.

use alloc::string::String;
use core::fmt;

/// Errors produced by the core algorithms.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Error {
    /// An argument violated a documented precondition.
    Argument(String),
    /// Embedding dimensions of two operands do not agree.
    DimMismatch { expected: usize, got: usize },
    /// A corpus (or token source) contains no documents or no tokens.
    EmptyCorpus,
    /// A query carries no token embeddings.
    EmptyQuery,
    /// An input embedding contains NaN or infinite components.
    NonFinite,
    /// The training loss became NaN.
    TrainDiverged { epoch: usize, step: usize },
    /// A linear system could not be factorized.
    Singular(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Argument(msg) => write!(f, "invalid argument: {msg}"),
            Error::DimMismatch { expected, got } => {
                write!(f, "dimension mismatch: expected {expected}, got {got}")
            }
            Error::EmptyCorpus => write!(f, "corpus is empty"),
            Error::EmptyQuery => write!(f, "query has no tokens"),
            Error::NonFinite => write!(f, "input contains non-finite values"),
            Error::TrainDiverged { epoch, step } => {
                write!(f, "training diverged (NaN loss) at epoch {epoch}, step {step}")
            }
            Error::Singular(msg) => write!(f, "singular system: {msg}"),
        }
    }
}

impl core::error::Error for Error {}

pub type Result<T> = core::result::Result<T, Error>;
