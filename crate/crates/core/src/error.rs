use thiserror::Error;

/// Errors raised by factorizations, solvers and the experiment harness.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("SVD did not converge after {sweeps} sweeps")]
    NoConvergence { sweeps: usize },

    #[error("condition number undefined: matrix has no nonzero singular values")]
    UndefinedCondition,

    #[error("error level exceeds matrix energy: h^2 = {h_sq:e} >= {energy:e}")]
    ErrorExceedsEnergy { h_sq: f64, energy: f64 },

    #[error("noise dominates signal: delta^2 + mu^2 = {target:e} >= |u|^2 = {u_norm_sq:e}")]
    NoiseDominatesSignal { target: f64, u_norm_sq: f64 },

    #[error("bracket exhausted: residual^2 in [{low_residual:e}, {high_residual:e}] misses target {target:e}")]
    BracketExhausted {
        target: f64,
        low_residual: f64,
        high_residual: f64,
    },

    #[error("parse error: {0}")]
    Parse(String),

    #[error("io error: {0}")]
    Io(String),
}

impl Error {
    /// Short machine-friendly name of the variant.
    pub fn name(&self) -> &'static str {
        match self {
            Error::InvalidInput(_) => "invalid-input",
            Error::DimensionMismatch(_) => "dimension-mismatch",
            Error::NoConvergence { .. } => "no-convergence",
            Error::UndefinedCondition => "undefined-condition",
            Error::ErrorExceedsEnergy { .. } => "error-exceeds-energy",
            Error::NoiseDominatesSignal { .. } => "noise-dominates-signal",
            Error::BracketExhausted { .. } => "bracket-exhausted",
            Error::Parse(_) => "parse-error",
            Error::Io(_) => "io-error",
        }
    }

    /// True for errors caused by malformed input rather than by a solver.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::InvalidInput(_) | Error::DimensionMismatch(_) | Error::Parse(_) | Error::Io(_)
        )
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
