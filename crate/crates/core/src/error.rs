use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{op}: dimension mismatch between {left:?} and {right:?}")]
    DimensionMismatch {
        op: &'static str,
        left: (usize, usize),
        right: (usize, usize),
    },
    #[error("expected a square matrix, got {0:?}")]
    NotSquare((usize, usize)),
    #[error("invalid shape: {0}")]
    Shape(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    /// A physical invariant failed; the message names the invariant.
    #[error("{what}: {}", failures.join(", "))]
    Validation { what: String, failures: Vec<String> },
    #[error("scene: {0}")]
    Scene(String),
}

impl Error {
    pub fn validation(what: impl Into<String>, failures: Vec<String>) -> Self {
        Error::Validation { what: what.into(), failures }
    }
}
