use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found} ({what})")]
    Dimension {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    #[error("unknown edge id {0}")]
    UnknownEdge(usize),

    #[error("node index {0} out of range")]
    UnknownNode(usize),

    #[error("training set is empty")]
    EmptyTrainingSet,

    #[error("labeled node {0} has a zero feature vector")]
    ZeroFeature(usize),

    #[error("squared norm of the feature vector of labeled node {0} under- or overflows")]
    FeatureScale(usize),

    #[error("true signal has zero norm")]
    ZeroSignal,

    #[error("error bound undefined: L = {l} must exceed sqrt(p) = {sqrt_p}")]
    BoundUndefined { l: f64, sqrt_p: f64 },

    #[error("invalid partition: {0}")]
    InvalidPartition(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("non-finite value at iteration {iteration}: {what}")]
    Diverged { iteration: usize, what: String },

    #[error("{path}:{line}: {msg}")]
    Parse {
        path: PathBuf,
        line: u64,
        msg: String,
    },

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn dim(what: &'static str, expected: usize, found: usize) -> Self {
        Error::Dimension {
            what,
            expected,
            found,
        }
    }
}
