use serde::Serialize;
use thiserror::Error;

/// A concrete point at which something went wrong, for diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Witness {
    pub at: f64,
    pub detail: String,
}

impl Witness {
    pub fn new(at: f64, detail: impl Into<String>) -> Self {
        Self { at, detail: detail.into() }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {message}")]
    Domain { message: String, witness: Option<Witness> },

    #[error("precondition violated: {message}")]
    Precondition { message: String, witness: Option<Witness> },

    #[error("integration failed: {0}")]
    StepFailure(String),

    #[error("quadrature failed: {0}")]
    Quadrature(String),

    #[error("no convergence: {0}")]
    NoConvergence(String),

    #[error("out of range: {0}")]
    OutOfRange(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn domain(message: impl Into<String>) -> Self {
        Error::Domain { message: message.into(), witness: None }
    }

    pub fn precondition(message: impl Into<String>, witness: Option<Witness>) -> Self {
        Error::Precondition { message: message.into(), witness }
    }

    /// Short machine-readable code used by the command line front end.
    pub fn code(&self) -> &'static str {
        match self {
            Error::Domain { .. } => "domain",
            Error::Precondition { .. } => "precondition",
            Error::StepFailure(_) => "step_failure",
            Error::Quadrature(_) => "quadrature",
            Error::NoConvergence(_) => "no_convergence",
            Error::OutOfRange(_) => "out_of_range",
            Error::Config(_) => "config",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
        }
    }

    pub fn witness(&self) -> Option<&Witness> {
        match self {
            Error::Domain { witness, .. } | Error::Precondition { witness, .. } => witness.as_ref(),
            _ => None,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
