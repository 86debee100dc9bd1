use num_complex::Complex64;
use thiserror::Error;

/// Errors raised by evaluation, construction and verification.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("argument {arg} is within {distance:.3e} of the singular point {point} of gamma")]
    Singularity {
        arg: Complex64,
        point: Complex64,
        distance: f64,
    },
    #[error("singularity in {which}: {source}")]
    Annotated {
        which: String,
        #[source]
        source: Box<Error>,
    },
    #[error("convergence failure: {0}")]
    Convergence(String),
    #[error("depth guard exceeded: {0}")]
    DepthGuard(String),
    #[error("unsupported operand: {0}")]
    Unsupported(String),
    #[error("index mismatch: {0}")]
    Index(String),
    #[error("unknown relation id {id:?}; valid ids: {valid}")]
    UnknownRelation { id: String, valid: String },
    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    /// Wraps an error with a note on which argument caused it.
    pub fn annotate(self, which: impl Into<String>) -> Error {
        Error::Annotated {
            which: which.into(),
            source: Box::new(self),
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
