use thiserror::Error;

/// Errors raised by the detectors, the simulation harness and the CLI.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension error: {0}")]
    Dimension(String),

    #[error("framing error: {len} bits is not a multiple of {bits_per_symbol} bits per symbol")]
    Framing { len: usize, bits_per_symbol: usize },

    #[error("invalid parameter `{name}`: {reason}")]
    Parameter { name: &'static str, reason: String },

    #[error("channel column {column} is zero and the proximal weight is zero; block update is undefined")]
    DegenerateColumn { column: usize },

    #[error("normal matrix is singular (zero regularization with rank-deficient channel)")]
    Singular,

    #[error("instance parse error at line {line}: {reason}")]
    Parse { line: usize, reason: String },

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::Parameter {
            name,
            reason: reason.into(),
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
