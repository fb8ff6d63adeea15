use thiserror::Error;

/// Errors surfaced by this crate.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument violated an operation's contract (non-finite input,
    /// out-of-range probability, empty sequence, ...).
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Two containers that must agree in length did not.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// An experiment configuration failed validation.
    #[error("invalid config: {0}")]
    InvalidConfig(String),

    /// A mathematical precondition of a bound evaluator was violated.
    #[error("precondition violated: {0}")]
    Precondition(String),

    /// The synchronous protocol broke one of its own invariants.
    #[error("protocol invariant violated: {0}")]
    Protocol(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
