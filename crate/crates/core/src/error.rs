use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain where the operation is defined.
    #[error("parameter out of domain: {0}")]
    Domain(String),

    /// An iteration failed to converge, a pivot vanished, or a value went non-finite.
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// The requested discretization is too ill-conditioned to assemble or solve.
    #[error("ill-conditioned system: {0}")]
    Conditioning(String),

    /// Shapes or layouts do not fit together.
    #[error("structural mismatch: {0}")]
    Structural(String),

    #[error("training failed: {0}")]
    Training(String),

    #[error("invalid file: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn numerical(msg: impl Into<String>) -> Self {
        Error::Numerical(msg.into())
    }
}
