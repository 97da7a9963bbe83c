use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("node index {index} out of range for a graph on {n} nodes (indices are 1-based)")]
    IndexOutOfRange { index: usize, n: usize },

    #[error("self-loop on node {0}")]
    SelfLoop(usize),

    #[error("duplicate edge ({0}, {1})")]
    DuplicateEdge(usize, usize),

    #[error("size mismatch: {what} has {found} entries, expected {expected}")]
    SizeMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("inter-layer coupling entry {index} is {value}, must be 0 or 1")]
    NonBinaryKappa { index: usize, value: i64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("graph has {n} nodes, automorphism search is capped at {cap}")]
    TooManyNodes { n: usize, cap: usize },

    #[error("group of order {order} exceeds the subgroup enumeration cap of {cap}")]
    GroupTooLarge { order: usize, cap: usize },

    #[error("cluster {cluster:?} mixes driven and undriven nodes (1-based indices)")]
    MixedCluster { cluster: Vec<usize> },

    #[error("pattern {0} is not the orbit partition of any subgroup of the layer's automorphism group")]
    NotRealizable(String),

    #[error("internal consistency failure: {0}")]
    Internal(String),

    #[error("partition is not equitable: {relation} residual {residual:e}")]
    NotEquitable { relation: &'static str, residual: f64 },

    #[error("partition is not an orbit partition: block off-diagonal residual {0:e}")]
    NotOrbitPartition(f64),

    #[error("integration diverged at t = {time}")]
    Divergence { time: f64 },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// Process exit status: 2 for bad input, 3 for divergence, 4 for I/O,
    /// 1 for anything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Divergence { .. } => 3,
            Error::Io { .. } => 4,
            Error::Internal(_) | Error::NotEquitable { .. } | Error::NotOrbitPartition(_) => 1,
            _ => 2,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
