use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Invalid emitter, excitation or detector parameters.
    #[error("configuration error: {0}")]
    Config(String),

    /// A mathematically undefined request (zero denominators, empty rates).
    #[error("domain error: {0}")]
    Domain(String),

    #[error("numerical failure: {message}")]
    Numerical { message: String, matrix: Option<String> },

    /// A model or residual produced NaN/inf; carries the offending parameter vector.
    #[error("non-finite residual at parameters {params:?}")]
    NonFinite { params: Vec<f64> },

    #[error("rank-deficient problem: {0}")]
    RankDeficient(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("usage error: {0}")]
    Usage(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("format error: {0}")]
    Format(String),

    #[error("bad magic: expected \"PHTS\", found {found:?}")]
    BadMagic { found: [u8; 4] },

    #[error("truncated record section: expected {expected} records, found {found}")]
    Truncated { expected: u64, found: u64 },

    #[error("non-monotonic timestamps in channel {channel} at record {index}")]
    NonMonotonic { channel: u8, index: u64 },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn numerical(message: impl Into<String>) -> Self {
        Error::Numerical {
            message: message.into(),
            matrix: None,
        }
    }

    /// Process exit code for the command-line front end:
    /// 1 usage, 2 format/configuration/I/O, 3 numerical failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Usage(_) | Error::Precondition(_) => 1,
            Error::Config(_)
            | Error::Io { .. }
            | Error::Format(_)
            | Error::BadMagic { .. }
            | Error::Truncated { .. }
            | Error::NonMonotonic { .. } => 2,
            Error::Domain(_)
            | Error::Numerical { .. }
            | Error::NonFinite { .. }
            | Error::RankDeficient(_) => 3,
        }
    }
}
