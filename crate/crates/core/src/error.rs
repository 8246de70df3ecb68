use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{what} {value} out of range")]
    OutOfRange { what: &'static str, value: f64 },

    #[error("singular evaluation: {0}")]
    Singular(&'static str),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("validation failed: {}", .0.join("; "))]
    Validation(Vec<String>),

    #[error("infeasible configuration: {}", .0.join("; "))]
    Infeasible(Vec<String>),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("no symmetry image lies in the canonical polytope")]
    NoCanonicalImage,

    #[error("factorization failed: {0}")]
    Factorization(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn parse(line: usize, message: impl Into<String>) -> Self {
        Error::Parse { line, message: message.into() }
    }
}
