//! Engine-level errors with CLI exit-code mapping.

use std::path::PathBuf;

/// Errors raised by the I/O layer, pipeline, and benchmark harness.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Core(#[from] lemur_core::Error),
    /// Structural problems in an input file (magic, version, field
    /// values).
    #[error("{path}: format error: {reason}")]
    Format { path: PathBuf, reason: String },
    /// The file parsed structurally but its payload is damaged
    /// (truncation, trailing bytes, non-finite values).
    #[error("{path}: corrupted: {reason}")]
    Corrupt { path: PathBuf, reason: String },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// Distinct process exit codes: 2 argument, 3 format/corruption,
    /// 4 numerical, 5 I/O.
    pub fn exit_code(&self) -> u8 {
        use lemur_core::Error as Core;
        match self {
            Error::Core(Core::Argument(_))
            | Error::Core(Core::DimMismatch { .. })
            | Error::Core(Core::EmptyCorpus)
            | Error::Core(Core::EmptyQuery) => 2,
            Error::Format { .. } | Error::Corrupt { .. } => 3,
            Error::Core(Core::NonFinite)
            | Error::Core(Core::TrainDiverged { .. })
            | Error::Core(Core::Singular(_)) => 4,
            Error::Io { .. } => 5,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn io_err(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> Error {
    let path = path.into();
    move |source| Error::Io { path, source }
}
