//! Crate-wide error type.

use crate::graph::NodeId;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("node {0} not found")]
    NodeNotFound(NodeId),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("incomplete solution: no pose for node {0}")]
    IncompleteSolution(NodeId),

    #[error("invalid trajectory: {0}")]
    InvalidTrajectory(String),

    #[error("invalid mission spec: {0}")]
    InvalidMission(String),

    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("state is not stationary (gradient norm {grad_norm:.3e} > {threshold:.3e})")]
    StationarityViolation { grad_norm: f64, threshold: f64 },

    #[error("rank limit {r_max} reached; cannot escape further")]
    RankLimitReached { r_max: usize },

    #[error("degenerate solution: {0}")]
    DegenerateSolution(String),

    #[error("insufficient matches: at least one correspondence is required")]
    InsufficientMatches,

    #[error("key mismatch: {0}")]
    KeyMismatch(String),

    #[error("unsupported options: {0}")]
    UnsupportedOptions(String),
}

impl Error {
    pub fn parse(line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            line,
            message: message.into(),
        }
    }
}
