use thiserror::Error;

use crate::sdp::SolverReport;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid POVM: {0}")]
    InvalidPovm(String),

    #[error("invalid behavior: {0}")]
    InvalidBehavior(String),

    #[error("degenerate case: {0}")]
    Degenerate(String),

    #[error("behavior cannot be reproduced at overlap {delta}")]
    InfeasibleBehavior { delta: f64 },

    #[error("witness fails the dual feasibility recheck (min eigenvalue {min_eigenvalue:e})")]
    InvalidWitness { min_eigenvalue: f64 },

    #[error("solver failed: {0}")]
    Solver(SolverReport),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
