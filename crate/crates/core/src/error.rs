use thiserror::Error;

use crate::scenario::Violation;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid scenario tree: {}", format_violations(.0))]
    InvalidTree(Vec<Violation>),
    #[error("parse error at node {node}: {message}")]
    Parse { node: String, message: String },
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("horizon mismatch: {0} vs {1}")]
    HorizonMismatch(usize, usize),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("problem too large: {what} needs {size}, budget is {budget}")]
    SizeExceeded {
        what: &'static str,
        size: usize,
        budget: usize,
    },
    #[error("solver failure: {0}")]
    Solver(String),
    #[error("cost is not stage-additive: {0}")]
    NotStageAdditive(String),
    #[error("strategy does not match tree: {0}")]
    StrategyMismatch(String),
    #[error("inconsistent coupling: {0}")]
    InconsistentCoupling(String),
    #[error("not certifiable: {0}")]
    NotCertifiable(String),
}

pub type Result<T> = std::result::Result<T, Error>;

fn format_violations(v: &[Violation]) -> String {
    v.iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join("; ")
}
