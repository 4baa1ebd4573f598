use thiserror::Error;

use crate::mdp::ValidationReport;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid MDP: {0}")]
    InvalidMdp(ValidationReport),

    #[error("invalid policy: {0}")]
    InvalidPolicy(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("state features are required to build neighborhoods")]
    MissingFeatures,

    #[error("invalid adversary model: {0}")]
    InvalidModel(String),

    #[error("adversary maps state {state} to {target}, which is outside its neighbor set")]
    Inadmissible { state: usize, target: usize },

    #[error("perturbed row at state {state} is not admissible: {reason}")]
    InadmissibleRow { state: usize, reason: String },

    #[error("enumeration of {count} adversaries exceeds the cap of {cap}")]
    CapExceeded { count: u128, cap: u128 },

    #[error("invalid perturbing direction: {0}")]
    InvalidDirection(String),

    #[error("policies must differ at exactly one state, found {0}")]
    NotSingleStateDifference(usize),

    #[error("operation requires a {expected} adversary model")]
    WrongFlavor { expected: &'static str },

    #[error("no single adversary attains the element-wise minimum value (max shortfall {shortfall:e})")]
    NoElementwiseMinimum { shortfall: f64 },

    #[error("linear system is singular or ill-conditioned (residual {0:e})")]
    Singular(f64),
}

pub type Result<T> = std::result::Result<T, Error>;
