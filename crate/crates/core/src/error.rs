use alloc::string::String;

use crate::conic::SolveStatus;

/// Errors raised anywhere in the planning pipeline.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("invalid set: {0}")]
    InvalidSet(String),
    #[error("set is unbounded or has no known bounding box")]
    Unbounded,
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("invalid problem: {0}")]
    InvalidProblem(String),
    #[error("invalid path: {0}")]
    InvalidPath(String),
    #[error("number of simple paths exceeds the limit of {limit}")]
    PathLimitExceeded { limit: usize },
    #[error("no feasible path: {0}")]
    NoFeasiblePath(String),
    #[error("solver returned {status:?}: {diagnostics}")]
    Solver {
        status: SolveStatus,
        diagnostics: String,
    },
    #[error("graph disconnected: {0}")]
    GraphDisconnected(String),
    #[error("relaxation infeasible")]
    RelaxationInfeasible,
    #[error("all rounded paths infeasible")]
    AllRoundedInfeasible,
    #[error("invalid trajectory: {0}")]
    InvalidTrajectory(String),
}

pub type Result<T, E = Error> = core::result::Result<T, E>;
