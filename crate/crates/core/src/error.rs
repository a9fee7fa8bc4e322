use thiserror::Error;

/// Errors raised by the relative-entropy toolkit.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    Parameter { name: String, reason: String },

    #[error("state outside the admissible domain: {0}")]
    Domain(String),

    /// The gradient of the conserved map is singular, i.e. (H1) fails at the state.
    #[error("(H1) violated: grad A is singular at {state:?}")]
    SingularGradA { state: Vec<f64> },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("Newton recovery of primitive state did not converge after {iterations} iterations")]
    Newton { iterations: usize },

    #[error("time step rejected: {0}")]
    StepRejected(String),

    #[error("simulation aborted at t = {time}: {reason}")]
    Aborted { time: f64, reason: String },

    #[error("precondition failed: {0}")]
    Precondition(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn param(name: &str, reason: impl Into<String>) -> Self {
        Error::Parameter {
            name: name.to_string(),
            reason: reason.into(),
        }
    }
}
