use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected} values, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("invalid {kind} id {id}")]
    InvalidId { kind: &'static str, id: usize },

    #[error("prototype {0:?} is not in the database")]
    UnknownPrototype(String),

    #[error("model has no strategies")]
    NoStrategies,

    #[error("probabilities for strategy {strategy}, history {history} sum to {sum}, expected 1")]
    RowSum {
        strategy: usize,
        history: usize,
        sum: f64,
    },

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error(
        "cannot normalize: best anchor value {best} does not exceed worst anchor value {worst}"
    )]
    NotNormalizable { best: f64, worst: f64 },

    #[error("invalid utility function {id}: {reason}")]
    InvalidUtility { id: String, reason: String },

    #[error("empty database")]
    EmptyDatabase,

    #[error("empty cluster")]
    EmptyCluster,

    #[error("invalid cluster count k={k} for {n} utility functions")]
    InvalidClusterCount { k: usize, n: usize },

    #[error("utility function {0} is not part of the clustering")]
    NotClustered(String),

    #[error("empty training set")]
    EmptyTrainingSet,

    #[error("invalid generator spec: {0}")]
    InvalidSpec(String),

    #[error("malformed database row {row}: {reason}")]
    MalformedRow { row: usize, reason: String },

    #[error("invalid evaluation parameters: {0}")]
    InvalidEvaluation(String),

    #[error("unknown history {0}")]
    UnknownHistory(String),

    #[error("unknown session {0}")]
    UnknownSession(String),

    #[error("session {0} is already complete")]
    SessionComplete(String),

    #[error("session {0} has an answer in flight")]
    SessionBusy(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
