use thiserror::Error;

/// Errors raised by the library and mapped onto CLI exit codes.
#[derive(Debug, Error)]
pub enum Error {
    #[error("config error: {0}")]
    Config(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("unsupported configuration: {0}")]
    Unsupported(String),

    #[error("numerical failure in {context}: {message}")]
    Numerical {
        context: String,
        message: String,
        /// Last estimate produced before giving up, when one exists.
        last_estimate: Option<f64>,
    },

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn numerical(context: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Numerical {
            context: context.into(),
            message: message.into(),
            last_estimate: None,
        }
    }

    /// Prefixes the context of a numerical failure, leaving other kinds untouched.
    pub fn in_context(self, outer: &str) -> Self {
        match self {
            Error::Numerical {
                context,
                message,
                last_estimate,
            } => Error::Numerical {
                context: format!("{outer}: {context}"),
                message,
                last_estimate,
            },
            other => other,
        }
    }

    /// Process exit code: 1 for configuration, domain and I/O problems, 2 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Numerical { .. } => 2,
            _ => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
