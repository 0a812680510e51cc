use thiserror::Error;

/// Errors raised by the numerical primitives, the model and the solvers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("argument {value} outside the domain of {what}")]
    Domain { what: &'static str, value: f64 },

    #[error("bisection bracket [{lo}, {hi}] does not contain a sign change")]
    Bracket { lo: f64, hi: f64 },

    #[error("{what} did not converge within {iterations} iterations")]
    Convergence { what: &'static str, iterations: usize },

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("epoch {epoch} infeasible: {reason}")]
    Infeasible { epoch: usize, reason: String },

    #[error("degenerate input at epoch {epoch}: {reason}")]
    Degenerate { epoch: usize, reason: String },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("index {index} out of range for {what} of length {len}")]
    Index {
        what: &'static str,
        index: usize,
        len: usize,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("evaluation budget of {budget} exceeded ({needed} required)")]
    Budget { budget: u64, needed: u64 },
}

pub type Result<T> = std::result::Result<T, Error>;
