use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("cannot decode {path}: {reason}")]
    Decode { path: PathBuf, reason: String },
    #[error("unsupported image format in {path}: {reason}")]
    Unsupported { path: PathBuf, reason: String },
    #[error("cannot encode image: {0}")]
    Encode(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("missing landmark: {0}")]
    MissingLandmark(String),
    #[error("landmark parse error at line {line}: {reason}")]
    LandmarkParse { line: usize, reason: String },
    #[error("degenerate geometry: {0}")]
    Degenerate(String),
    #[error("internal error: {0}")]
    Internal(String),
    #[error(
        "poisson solver did not converge (residual {residual:e} after {iterations} iterations)"
    )]
    NoConvergence { residual: f64, iterations: usize },
    #[error("objective is not finite at the start point")]
    NonFiniteObjective,
    #[error("unknown layer `{0}`")]
    UnknownLayer(String),
    #[error("weight container: {0}")]
    Container(String),
    #[error("training data: {0}")]
    Training(String),
    #[error("metric input: {0}")]
    Metric(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
