use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("{path}: row {row}: {msg}")]
    Parse {
        path: PathBuf,
        row: usize,
        msg: String,
    },

    #[error("covariance of component {component} is not positive definite")]
    NotSpd { component: usize },

    #[error("demonstration generation failed after {attempts} attempts: {reason}")]
    Synthesis { attempts: usize, reason: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::Invalid(msg.into())
    }

    /// True for errors caused by bad user input rather than an internal fault.
    pub fn is_validation(&self) -> bool {
        !matches!(self, Error::Synthesis { .. })
    }
}

pub type Result<T> = std::result::Result<T, Error>;
