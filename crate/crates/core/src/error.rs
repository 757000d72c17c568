use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("parse error at {context}: {message}")]
    Parse { context: String, message: String },

    #[error("invalid event {index}: {message}")]
    InvalidEvent { index: usize, message: String },

    #[error("event out of order: time {time} precedes last applied time {last}")]
    Ordering { time: f64, last: f64 },

    #[error("unknown node {node} (node count {node_count})")]
    UnknownNode { node: u32, node_count: usize },

    #[error("event {event_index}: risk set holds no dyad other than the observed one")]
    UnsatisfiableControl { event_index: usize },

    #[error("event {event_index}: observed dyad ({sender}, {receiver}) is not in the risk set")]
    NotAtRisk {
        event_index: usize,
        sender: u32,
        receiver: u32,
    },

    #[error("event {event_index}: empty risk set")]
    EmptyRiskSet { event_index: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("non-finite output from subnet {subnet}")]
    NonFinite { subnet: usize },

    #[error("non-finite loss at epoch {epoch}, batch {batch} (subnet {subnet:?})")]
    NanLoss {
        epoch: usize,
        batch: usize,
        subnet: Option<usize>,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("cholesky factorization failed for {size}x{size} system with jitter {jitter}; try a larger jitter")]
    Factorization { size: usize, jitter: f64 },

    #[error("bootstrap refit {index}: {source}")]
    Refit {
        index: usize,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub fn parse(context: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Parse {
            context: context.into(),
            message: message.into(),
        }
    }
}
