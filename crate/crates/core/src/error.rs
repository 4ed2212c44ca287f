use thiserror::Error;

/// Errors raised by the estimation, control and simulation layers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("unit field is empty")]
    EmptyField,

    #[error("observation store is empty")]
    EmptyStore,

    #[error("gain search failed: no gain >= {gamma_min:e} makes the dissipation matrix positive definite")]
    GainSearchFailure { gamma_min: f64 },

    #[error("matrix is rank deficient (rank {rank} < {required}); supply a regularization term")]
    RankDeficient { rank: usize, required: usize },

    #[error("too few contour samples: need at least {required}, got {got}")]
    InsufficientSamples { required: usize, got: usize },

    #[error("infeasible configuration: {0}")]
    InfeasibleConfiguration(String),

    #[error("cable solver did not converge after {iterations} iterations (residual {residual:e})")]
    SolverFailure { iterations: usize, residual: f64 },

    #[error("action rejected: {0}")]
    RejectedAction(String),

    #[error("closed loop diverged at step {step}: E = {energy:e} (initial {initial:e})")]
    Divergence {
        step: usize,
        energy: f64,
        initial: f64,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
