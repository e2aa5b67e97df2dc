use thiserror::Error;

/// Errors raised by the solver library.
///
/// Each variant maps onto one process exit code (see [`KweError::exit_code`]).
#[derive(Debug, Error)]
pub enum KweError {
    #[error("configuration error at `{path}`: {message}")]
    Config { path: String, message: String },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("numerical instability at t = {time}: {message}")]
    Instability { time: f64, message: String },

    #[error("property violation: {0}")]
    Property(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("format error: {0}")]
    Format(String),
}

impl KweError {
    pub fn config(path: impl Into<String>, message: impl Into<String>) -> Self {
        KweError::Config {
            path: path.into(),
            message: message.into(),
        }
    }

    pub fn domain(message: impl Into<String>) -> Self {
        KweError::Domain(message.into())
    }

    pub fn property(message: impl Into<String>) -> Self {
        KweError::Property(message.into())
    }

    /// 0 ok, 2 config, 3 numerical instability, 4 property violation.
    pub fn exit_code(&self) -> i32 {
        match self {
            KweError::Config { .. } => 2,
            KweError::Instability { .. } => 3,
            KweError::Property(_) | KweError::Domain(_) => 4,
            KweError::Io(_) | KweError::Format(_) => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, KweError>;
