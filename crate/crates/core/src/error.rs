use thiserror::Error;

use crate::topology::NodeId;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("zero has no multiplicative inverse")]
    NoInverse,

    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("index {index} out of range 1..={max}")]
    IndexOutOfRange { index: usize, max: usize },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("inconsistent system: received packets do not belong to one generation")]
    Inconsistent,

    #[error("invalid parameter {field}: {reason}")]
    InvalidParams { field: &'static str, reason: String },

    #[error("invalid topology: {0}")]
    Topology(String),

    #[error("unknown node {0}")]
    UnknownNode(NodeId),

    #[error("node {node} holds no key for {peer}")]
    MissingKey { node: NodeId, peer: String },

    #[error("malformed packet: {0}")]
    Malformed(String),

    #[error("unknown scheme `{0}`")]
    UnknownScheme(String),

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
}

impl Error {
    pub(crate) fn invalid(field: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParams { field, reason: reason.into() }
    }

    pub(crate) fn check_len(expected: usize, actual: usize) -> Result<()> {
        if expected == actual {
            Ok(())
        } else {
            Err(Error::LengthMismatch { expected, actual })
        }
    }
}
