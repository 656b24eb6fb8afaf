use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("self-loop requested at node {0}")]
    SelfLoop(usize),

    #[error("node {node} is out of range for a graph with {n_nodes} nodes")]
    NodeOutOfRange { node: usize, n_nodes: usize },

    #[error("nodes {i} and {j} belong to different blocks")]
    DifferentBlocks { i: usize, j: usize },

    #[error("invalid partition: {0}")]
    InvalidPartition(String),

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("invalid subgraph reference ({k}, {l}) for {n_blocks} blocks")]
    InvalidSubgraph { k: usize, l: usize, n_blocks: usize },

    #[error("subgraph ({k}, {l}) has {dim} edge variables, above the enumeration cap of {cap}")]
    EnumerationCap { k: usize, l: usize, dim: usize, cap: usize },

    #[error("importance sample is empty")]
    EmptySample,

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("matrix is not positive semidefinite (eigenvalue {0:e})")]
    NotPositiveSemidefinite(f64),

    #[error("matrix is singular; coordinate {0} has no usable information")]
    Singular(usize),

    #[error("{0}")]
    Undefined(String),

    #[error("{path}: {message}")]
    Config { path: String, message: String },

    #[error("{file}:{line}: {message}")]
    Parse { file: String, line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn config(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config { path: path.into(), message: message.into() }
    }

    /// Numerical failures map to a distinct process exit code from input errors.
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::NotPositiveSemidefinite(_) | Error::Singular(_))
    }
}
