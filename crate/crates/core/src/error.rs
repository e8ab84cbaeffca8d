use thiserror::Error;

/// Errors reported by the analysis routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("resource limit exceeded: {what} (limit {limit})")]
    ResourceLimit { what: String, limit: usize },

    #[error("degenerate dynamics: rotation angle is zero")]
    DegenerateDynamics,

    /// The Legendre closed forms need tan²θ < 1.
    #[error("closed form outside its domain: tan^2(theta) = {tan2theta} >= 1")]
    Domain { tan2theta: f64 },

    #[error(
        "threshold {threshold} never reached (supremum observed {supremum} up to K = {max_k})"
    )]
    NoCrossing {
        threshold: f64,
        supremum: f64,
        max_k: usize,
    },
}

pub type Result<T> = std::result::Result<T, Error>;
