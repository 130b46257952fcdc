use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the library. The display form always starts with the
/// name of the stage that failed.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dataset: {0}")]
    Dataset(String),

    #[error("kernels: {0}")]
    Kernel(String),

    #[error("manifold: {0}")]
    Manifold(String),

    #[error("solvers: {0}")]
    Solver(String),

    #[error("eval: {0}")]
    Eval(String),

    #[error("model: {0}")]
    Model(String),

    #[error("cache: {0}")]
    Cache(String),

    #[error("io: {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
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
