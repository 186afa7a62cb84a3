use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid network: {0}")]
    InvalidNetwork(String),

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("topology is not simple: {0}")]
    NotSimple(String),

    #[error("node {to} is not reachable from node {from}")]
    Unreachable { from: usize, to: usize },

    #[error("composite variance must be positive, got {value} at node {node}")]
    NonPositiveVariance { node: usize, value: f64 },

    #[error("regressor covariance of node {0} is not positive definite")]
    NotPositiveDefinite(usize),

    #[error("no feasible beta up to {0}")]
    BetaInfeasible(f64),

    #[error("dynamics are unstable: {0}")]
    Unstable(String),

    #[error("trace has not converged: {0}")]
    NotConverged(String),

    #[error("linear program is infeasible")]
    Infeasible,

    #[error("linear program is unbounded")]
    Unbounded,

    #[error("iteration limit of {0} reached")]
    IterationLimit(usize),

    #[error("infeasible plan: {0}")]
    InfeasiblePlan(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<toml::de::Error> for Error {
    fn from(e: toml::de::Error) -> Self {
        Error::Parse(e.to_string())
    }
}
