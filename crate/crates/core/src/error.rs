use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("calibration failed after {iterations} iterations: {reason} (residuals {residuals:?})")]
    Calibration { reason: String, iterations: usize, residuals: Vec<f64> },

    #[error("operating point did not converge: bracket [{lo:.9}, {hi:.9}] V, current mismatch {mismatch:.3e} A")]
    Solver { lo: f64, hi: f64, mismatch: f64 },

    #[error("SET did not reach a fixed point after {iterations} iterations (last step {last_step:.3} ohm)")]
    Set { iterations: usize, last_step: f64 },

    #[error("{failed} of {total} Monte Carlo samples failed (first: {first})")]
    MonteCarlo { failed: usize, total: usize, first: String },

    #[error("dataset {path}: row {row}: {message}")]
    Ingestion { path: String, row: usize, message: String },

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    /// True for failures of a numerical procedure (as opposed to bad input).
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::Calibration { .. } | Error::Solver { .. } | Error::Set { .. } | Error::MonteCarlo { .. })
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
