use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{kind} does not support dimension {dim}")]
    UnsupportedDimension { kind: String, dim: usize },

    #[error("point count must be at least 1")]
    EmptyPointSet,

    #[error("instance too large: {0}")]
    TooLarge(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("forward state does not match the parameters or batch")]
    StaleForwardState,

    #[error("training diverged at epoch {epoch} (loss {loss})")]
    Diverged { epoch: usize, loss: f64 },

    #[error("every grid cell diverged")]
    AllCellsDiverged,

    #[error("integration did not terminate before t = {limit} s")]
    NonTermination { limit: f64 },

    #[error("unknown benchmark `{0}`")]
    UnknownBenchmark(String),

    #[error("model file: {0}")]
    ModelFormat(String),

    #[error("{path}: {source}")]
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
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
