use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("oracle supports at most 12 premise columns, got {0}")]
    OracleScope(usize),

    #[error("projection did not converge after {iterations} iterations")]
    NotConverged { iterations: usize },

    #[error("authentication rejected by embedding endpoint (HTTP {status})")]
    Auth { status: u16 },

    #[error("transport error after {attempts} attempt(s): {message}")]
    Transport { attempts: usize, message: String },

    #[error("protocol error: {0}")]
    Protocol(String),

    #[error("cache corruption in {path} line {line}: {message}")]
    CacheCorruption { path: PathBuf, line: usize, message: String },

    #[error("schema error in {location}: {message}")]
    Schema { location: String, message: String },

    #[error("integrity error in {location}: {message}")]
    Integrity { location: String, message: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn degenerate(msg: impl Into<String>) -> Self {
        Error::DegenerateInput(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    /// True for failures talking to a remote service (retries exhausted, bad payloads).
    pub fn is_transport(&self) -> bool {
        matches!(self, Error::Transport { .. } | Error::Protocol(_))
    }
}
