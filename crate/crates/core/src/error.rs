use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("no demonstrations")]
    NoDemonstrations,

    #[error("empty legal action set in state {0}")]
    EmptyLegalSet(usize),

    #[error("action {action} is not legal in state {state}")]
    IllegalAction { state: usize, action: usize },

    #[error("state {0} is terminal")]
    TerminalState(usize),

    #[error("state {state} out of range (environment has {n_states} states)")]
    StateOutOfRange { state: usize, n_states: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error(
        "matrix is numerically singular (condition estimate {condition:e}); use a larger ridge"
    )]
    Singular { condition: f64 },

    #[error("value undefined: undiscounted model has a non-absorbing recurrent class")]
    ValueUndefined,

    #[error("value iteration did not converge within {0} sweeps")]
    NotConverged(usize),

    #[error("PO model produces no reward function")]
    NoRewardFunction,

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("invalid demonstration: {0}")]
    InvalidDemonstration(String),

    #[error("parse error on line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Errors caused by bad user input rather than a failing computation.
    pub fn is_config_error(&self) -> bool {
        matches!(self, Error::Config(_))
    }
}
