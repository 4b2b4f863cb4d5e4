use thiserror::Error;

/// Errors surfaced by the library.
///
/// Validation failures (bad shapes, values outside tolerance) are separated
/// from numerical failures (solvers that stall, likelihoods that vanish) so
/// callers can decide which ones are recoverable.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid probability vector: {0}")]
    InvalidProbability(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A label set has zero likelihood under every mixture component, so
    /// responsibilities for it are undefined.
    #[error("label set {index} has zero likelihood under every component")]
    DegenerateRow { index: usize },

    #[error("solver stopped after {iterations} iterations with residual {residual:.3e}")]
    NoConvergence { iterations: usize, residual: f64 },

    /// A failure inside the cleaning loop, tagged with the epoch it
    /// occurred in.
    #[error("epoch {epoch}: {source}")]
    Pipeline {
        epoch: usize,
        #[source]
        source: Box<Error>,
    },

    /// An invariant the implementation promises to maintain was violated;
    /// always a bug, never a user error.
    #[error("internal consistency violation: {0}")]
    InternalConsistency(String),
}

pub type Result<T> = std::result::Result<T, Error>;
