use thiserror::Error;

/// Errors raised by the numeric and modelling layers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("{routine} did not converge within {iterations} iterations")]
    Convergence {
        routine: &'static str,
        iterations: usize,
    },

    #[error("accuracy not reached: estimated error {achieved:.3e} exceeds tolerance {requested:.3e}")]
    AccuracyNotReached { achieved: f64, requested: f64 },

    #[error("config mismatch: {0}")]
    ConfigMismatch(String),

    #[error("power iteration did not converge after {iterations} iterations (best estimate {estimate})")]
    SpectralRadius { estimate: f64, iterations: usize },

    #[error("malformed companion matrix: spectral radius {0} exceeds 1")]
    MalformedMatrix(f64),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}
