//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A quantity string such as "0.02ns" or "28MB" could not be parsed.
    #[error("invalid quantity '{input}': {reason}")]
    UnitParse { input: String, reason: String },

    /// A configuration value violates an invariant (non-positive latency,
    /// capacity not divisible by banks, ...).
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    /// A layer description does not describe a valid convolution.
    #[error("invalid layer '{layer}': {reason}")]
    InvalidLayer { layer: String, reason: String },

    /// A requested design point cannot be realized (e.g. a pipeline stage
    /// target below the component latency floor).
    #[error("infeasible design: {0}")]
    InfeasibleDesign(String),

    /// The allocation program has no feasible assignment.
    #[error("infeasible allocation: {0}")]
    InfeasibleIlp(String),

    /// A solver mode was asked to do something outside its contract
    /// (e.g. exhaustive enumeration above the variable-count cap).
    #[error("solver: {0}")]
    Solver(String),

    /// A schedule failed independent validation.
    #[error("schedule validation failed: {violations:?}")]
    InvalidSchedule { violations: Vec<String> },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("config parse error: {0}")]
    Toml(#[from] toml::de::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
