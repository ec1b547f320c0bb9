use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Argument outside the domain of the operation.
    Domain(String),
    /// Conjugate evaluated outside its effective domain; carries the offending direction.
    ConjugateDomain { message: String, direction: Vec<f64> },
    /// The constitutive data violates a structural hypothesis.
    Structural(String),
    /// Inconsistent numerical configuration.
    Config(String),
    /// A time step could not be completed.
    StepRejected {
        reason: String,
        suggested_dt: f64,
        history: Vec<f64>,
    },
    /// Newton iteration for the Galerkin system did not converge.
    Newton { residual: f64, iterations: usize },
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Domain(m) => write!(f, "domain error: {m}"),
            Error::ConjugateDomain { message, .. } => write!(f, "conjugate undefined: {message}"),
            Error::Structural(m) => write!(f, "structural error: {m}"),
            Error::Config(m) => write!(f, "configuration error: {m}"),
            Error::StepRejected {
                reason,
                suggested_dt,
                ..
            } => write!(f, "step rejected: {reason} (try dt <= {suggested_dt:e})"),
            Error::Newton {
                residual,
                iterations,
            } => write!(
                f,
                "newton failed after {iterations} iterations, residual {residual:e}"
            ),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for Error {}

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}

pub(crate) fn config(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}
