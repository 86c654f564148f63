use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid category {label}: expected a value in 1..={k}")]
    InvalidCategory { label: usize, k: usize },

    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    Dimension {
        context: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("degenerate problem: {0}")]
    Degenerate(String),

    #[error("invalid adaptation tree: {0}")]
    Tree(#[from] TreeError),

    #[error("{path}:{line}: {message}")]
    Parse { path: String, line: usize, message: String },

    #[error("unsupported model format version {found} (expected {expected})")]
    Version { found: u64, expected: u64 },

    #[error("corrupted model file: {0}")]
    CorruptModel(String),

    #[error("protocol error: {0}")]
    Protocol(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("non-finite objective value or gradient at the initial point")]
    NonFiniteStart,

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn dim(context: &'static str, expected: usize, found: usize) -> Self {
        Error::Dimension {
            context,
            expected,
            found,
        }
    }
}

/// Reasons an adaptation tree description is rejected.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TreeError {
    #[error("the tree has no nodes")]
    Empty,
    #[error("node name `{0}` is used more than once")]
    DuplicateName(String),
    #[error("leaf `{0}` has no domain")]
    LeafWithoutDomain(String),
    #[error("internal node `{0}` carries a domain")]
    DomainOnInternalNode(String),
    #[error("domain `{domain}` is assigned to both `{first}` and `{second}`")]
    DuplicateDomain {
        domain: String,
        first: String,
        second: String,
    },
    #[error("node name must not be empty")]
    EmptyName,
}
