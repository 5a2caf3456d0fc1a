use thiserror::Error;

use crate::model::InteractionRecord;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("propensity at position {index} must be positive and finite, got {value}")]
    InvalidPropensity { index: usize, value: f64 },

    #[error("invalid belief: {0}")]
    InvalidBelief(String),

    #[error("invalid dimensions: {0}")]
    InvalidDims(String),

    #[error("{kind} id {id} out of range (must be < {bound})")]
    OutOfRange {
        kind: &'static str,
        id: usize,
        bound: usize,
    },

    #[error("protocol violation: {0}")]
    ProtocolViolation(String),

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("invalid scenario: {0}")]
    InvalidScenario(String),

    #[error("degenerate update: every shrunk particle assigns zero likelihood to {record:?}")]
    DegenerateUpdate { record: InteractionRecord },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("invariant violation: {0}")]
    InvariantViolation(String),

    #[error("MCMC tuning failed: acceptance rate {rate:.4} outside [{min}, {max}]")]
    TuningFailure { rate: f64, min: f64, max: f64 },

    #[error("too large to enumerate: {0}")]
    TooLarge(String),

    #[error("decode error: {0}")]
    Decode(String),

    #[error("internal error: {0}")]
    Internal(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
