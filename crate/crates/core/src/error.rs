use rdoe_conic::{BackendError, ProgramError};
use std::path::PathBuf;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot read or write {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error: {0}")]
    Parse(String),
    #[error("invalid network: {0}")]
    Validation(String),
    #[error("invalid uncertainty specification: {0}")]
    Uncertainty(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("value lies outside the affine span of the uncertainty map (residual {0:.3e})")]
    OutsideSpan(f64),
    #[error("sampling failed: {0}")]
    Sampling(String),
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error(transparent)]
    Program(#[from] ProgramError),
    #[error(transparent)]
    Backend(#[from] BackendError),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
