//! Command failures and their exit codes.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Failure {
    /// Bad arguments, config, model files or output paths: exit code 2.
    #[error("configuration error: {0}")]
    Config(String),
    /// A solve, factorization or training run failed: exit code 3.
    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl Failure {
    pub fn config(msg: impl Into<String>) -> Self {
        Failure::Config(msg.into())
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            Failure::Config(_) => 2,
            Failure::Numerical(_) => 3,
        }
    }
}

impl From<muntz_core::Error> for Failure {
    fn from(e: muntz_core::Error) -> Self {
        use muntz_core::Error as E;
        match e {
            E::Domain(_) | E::Structural(_) | E::Format(_) | E::Io(_) => Failure::Config(e.to_string()),
            E::Numerical(_) | E::Conditioning(_) | E::Training(_) => Failure::Numerical(e.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Config(format!("I/O error: {e}"))
    }
}
