use thiserror::Error;

use crate::pipeline::ConfigViolation;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("degenerate fit: {0}")]
    DegenerateFit(String),

    #[error("no communication model calibrated for ag={ag}, eg={eg}")]
    MissingCommModel { ag: usize, eg: usize },

    #[error("invalid specification: {0}")]
    InvalidSpec(String),

    #[error("infeasible configuration: {}", join(.0))]
    Infeasible(Vec<ConfigViolation>),

    #[error("empty feasible set: {0}")]
    NoFeasibleConfig(String),

    #[error("search space of {estimate} points exceeds the limit of {limit}")]
    SearchTooLarge { estimate: u128, limit: u128 },

    #[error("{path}: {message}")]
    Parse { path: String, message: String },

    #[error("schedule simulation stalled with {unscheduled} tasks left")]
    Stalled { unscheduled: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

fn join(v: &[ConfigViolation]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join("; ")
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
