use thiserror::Error;

/// Failure modes of the library.
///
/// The CLI maps [`ErrorClass`] onto exit codes, so every variant belongs to
/// exactly one class.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("matrix must be square, got {rows}x{cols}")]
    NonSquare { rows: usize, cols: usize },
    #[error("non-finite entry in {0}")]
    NonFinite(&'static str),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("{0} did not converge")]
    Convergence(&'static str),
    #[error("singular or near-singular system (condition estimate {0:.3e})")]
    Singular(f64),
    #[error("ODE step size underflow at t = {0}")]
    StepUnderflow(f64),
    #[error("exponential fit failed: {0}")]
    Fit(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("no steady state: generator is unstable (net heating)")]
    Heating,
    #[error("validity guard: {0}")]
    Validity(String),
}

/// Coarse classification used for process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Input,
    Numerical,
    Validity,
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::InvalidInput(_) | Error::NonSquare { .. } | Error::DimensionMismatch(_) => {
                ErrorClass::Input
            }
            Error::Validity(_) | Error::Precondition(_) => ErrorClass::Validity,
            _ => ErrorClass::Numerical,
        }
    }
}

pub type Result<T> = core::result::Result<T, Error>;
