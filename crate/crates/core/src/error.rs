use thiserror::Error;

use crate::graph::Edge;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    #[error("invalid action: edge {0} is not in the graph")]
    UnknownEdge(Edge),

    #[error("invalid action: {0}")]
    InvalidAction(String),

    #[error("invalid matrix: {0}")]
    InvalidMatrix(String),

    #[error("invalid schedule: {0}")]
    InvalidSchedule(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid epsilon: {0}")]
    InvalidEpsilon(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("enumeration size {size} exceeds cap {cap}")]
    CapExceeded { size: u128, cap: u128 },

    #[error("precondition failed: {0}")]
    Precondition(String),
}

pub type Result<T> = std::result::Result<T, Error>;
