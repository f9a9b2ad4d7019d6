use thiserror::Error;

/// Errors raised by the game laboratory.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("time {t} outside [0, {horizon}]")]
    TimeOutOfDomain { t: f64, horizon: f64 },

    #[error("action {0:?} is not a member of the action set")]
    UnknownAction(Vec<f64>),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("game matrix is empty")]
    EmptyMatrix,

    #[error("probability {0} outside [0, 1]")]
    Probability(f64),

    #[error("{rows}x{cols} game exceeds the enumeration limit of {max}x{max}")]
    TooLargeForEnumeration { rows: usize, cols: usize, max: usize },

    #[error("time step {dt} exceeds the stable explicit step {max_dt}")]
    Cfl { dt: f64, max_dt: f64 },

    #[error("non-finite value at time {t}, node {node}")]
    NonFinite { t: f64, node: usize },

    #[error("priority depends on the state; deterministic marks need a time-only priority")]
    StateDependentPriority,

    #[error("density condition failed: max block length {max_block_length}, max deviation {max_deviation}, epsilon {epsilon}")]
    Density {
        max_block_length: f64,
        max_deviation: f64,
        epsilon: f64,
    },

    #[error("misaligned inputs: {0}")]
    Misaligned(String),

    #[error("strategy undefined: {0}")]
    Strategy(String),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
