use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("node has no available channel")]
    NoChannel,

    #[error("topology generation failed after {attempts} attempts (N={nodes}, area={width}x{height} m, range={range} m); scenario is infeasible")]
    TopologyInfeasible {
        attempts: u32,
        nodes: usize,
        width: f64,
        height: f64,
        range: f64,
    },

    #[error("invalid comparison: {0}")]
    InvalidComparison(String),

    #[error("PPR undefined: {0}")]
    UndefinedPpr(String),

    #[error("parse error in {path}: {message}")]
    Parse { path: PathBuf, message: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
