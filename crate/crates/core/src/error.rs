use thiserror::Error;

/// Errors produced anywhere in the estimation pipeline.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// The observed table cannot support the requested computation.
    #[error("degenerate data: {0}")]
    DegenerateData(String),

    /// A closed-form estimator has no finite, positive value for this table.
    #[error("{estimator} is undefined for this table: {reason}")]
    UndefinedEstimator {
        estimator: &'static str,
        reason: String,
    },

    /// An argument lies outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A population definition does not induce valid cell probabilities.
    #[error("infeasible population: {0}")]
    InfeasibleSpec(String),

    /// A truncation interval carries too little probability mass to sample from.
    #[error("truncation interval [{lo}, {hi}] has negligible mass ({mass:e})")]
    Underflow { lo: f64, hi: f64, mass: f64 },

    /// Inconsistent or invalid configuration.
    #[error("configuration error: {0}")]
    Config(String),

    /// A Gibbs chain could not continue.
    #[error("chain {chain} failed at iteration {iteration}: {reason}")]
    ChainFailure {
        chain: usize,
        iteration: usize,
        reason: String,
    },

    /// The convergence statistic is not defined for these traces.
    #[error("degenerate diagnostic: {0}")]
    DegenerateDiagnostic(String),

    /// Every replication of a simulation study failed.
    #[error("study failed: {0}")]
    Study(String),
}

pub type Result<T> = std::result::Result<T, Error>;
