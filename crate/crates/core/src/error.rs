use thiserror::Error;

/// Errors produced by dataset construction, protocol runs and the
/// experiment harness.
#[derive(Debug, Error)]
pub enum Error {
    /// Invalid run or experiment configuration (zero-sized dataset,
    /// out-of-range ratio, unknown experiment kind, ...).
    #[error("configuration error: {0}")]
    Config(String),

    /// A predicate referenced an attribute the dataset does not hold.
    #[error("schema error: {0}")]
    Schema(String),

    /// An argument violated a numeric or set-theoretic precondition.
    #[error("domain error: {0}")]
    Domain(String),

    /// Malformed input while ingesting an external file. `line` is
    /// 1-based.
    #[error("ingestion error at line {line}: {message}")]
    Ingest { line: usize, message: String },

    /// No sample size satisfies the requested bound.
    #[error("infeasible: {0}")]
    Infeasible(String),

    /// A set exceeded the configured protocol capacity (polynomial
    /// degree, padding target).
    #[error("capacity error: {0}")]
    Capacity(String),

    /// A value could not be embedded into the cryptographic group or
    /// plaintext space.
    #[error("encoding error: {0}")]
    Encoding(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
