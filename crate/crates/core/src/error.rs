use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid instance: {0}")]
    InvalidInstance(String),

    #[error("request for object {object} at node {ingress} cannot be served by any approximizer")]
    Unservable { object: usize, ingress: usize },

    #[error("allocation is infeasible: {0}")]
    InfeasibleAllocation(String),

    #[error("invalid constraint: {0}")]
    InvalidConstraint(String),

    #[error("search space has {size} configurations, above the cap of {cap}")]
    CombinatorialSize { size: u128, cap: u128 },

    #[error("no progress after {attempts} attempts: {reason}")]
    NoProgress { attempts: usize, reason: String },

    #[error("solver did not converge after {iterations} iterations (KKT residual {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("unsupported topology: {0}")]
    UnsupportedTopology(String),

    #[error("{}:{line}: {message}", path.display())]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("invalid configuration:\n{}", .0.join("\n"))]
    Config(Vec<String>),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn instance(msg: impl Into<String>) -> Self {
        Error::InvalidInstance(msg.into())
    }
}
