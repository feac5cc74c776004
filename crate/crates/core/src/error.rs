use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid environment model: {0}")]
    InvalidModel(String),

    #[error("no positive root of E[alpha^s] = 1: {0}")]
    NoPositiveRoot(String),

    #[error("E[ln alpha] = 0: the walk is recurrent")]
    DegenerateRecurrent,

    #[error("truncation horizon exhausted: {0}")]
    HorizonExhausted(String),

    #[error("only {found} samples exceed the top level (need {needed})")]
    InsufficientExceedances { found: usize, needed: usize },

    #[error("step budget of {budget} exceeded")]
    StepBudgetExceeded { budget: u64 },

    #[error("regime mismatch: {0}")]
    RegimeMismatch(String),

    #[error("missing centering input: {0}")]
    MissingCentering(&'static str),

    #[error("characteristic-function inversion unstable (error estimate {estimate:.3e} > {bound:.3e})")]
    InversionUnstable { estimate: f64, bound: f64 },

    #[error("window too small: {0}")]
    WindowTooSmall(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("configuration error: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;
