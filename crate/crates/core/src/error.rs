use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("channel h[{bs},{cell},{user}] is the zero vector")]
    ZeroChannel { bs: usize, cell: usize, user: usize },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("fixed-point iteration did not converge after {iterations} iterations (residual {residual:e})")]
    FixedPointDiverged { iterations: usize, residual: f64 },

    #[error("derivative system is singular or ill-conditioned (spectral radius {spectral_radius})")]
    IllConditioned { spectral_radius: f64 },

    #[error("cannot aggregate an empty group")]
    EmptyGroup,

    #[error("config error: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
}

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
