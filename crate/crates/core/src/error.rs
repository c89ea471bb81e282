use thiserror::Error;

/// Errors raised anywhere in the laboratory.
#[derive(Debug, Error)]
pub enum Error {
    /// A parameter or configuration value violates a structural requirement.
    #[error("invalid parameter `{field}`: {message}")]
    Invalid { field: String, message: String },

    /// A kernel, reaction, field or intermediate produced a non-finite value.
    #[error("non-finite value in {context} at {location}")]
    NonFinite { context: String, location: String },

    /// The requested backend cannot represent this operator.
    #[error("unsupported backend: {0}")]
    Unsupported(String),

    /// An iterative method failed to reach its tolerance.
    #[error("{method} did not converge: {message} (last residuals: {history:?})")]
    NoConvergence {
        method: String,
        message: String,
        history: Vec<f64>,
    },

    /// A mapped point or time falls outside what the data covers.
    #[error("out of domain: {0}")]
    OutOfDomain(String),

    /// A numerical result breaks a structural invariant (positivity, bounds, ...).
    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Invalid {
            field: field.into(),
            message: message.into(),
        }
    }

    pub(crate) fn non_finite(context: impl Into<String>, location: impl Into<String>) -> Self {
        Error::NonFinite {
            context: context.into(),
            location: location.into(),
        }
    }

    /// Process exit code for the command-line front end: 2 for configuration
    /// problems, 3 for everything numerical.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Invalid { .. } | Error::Json(_) => 2,
            _ => 3,
        }
    }
}
