use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimMismatch { expected: usize, got: usize },

    #[error("covariance is not symmetric: |a - a'| reaches {max_abs_diff:.3e}")]
    Asymmetric { max_abs_diff: f64 },

    #[error("matrix is not positive definite (pivot {pivot} failed after one jitter retry)")]
    NotPositiveDefinite { pivot: usize },

    #[error("mixture needs at least one component")]
    EmptyMixture,

    #[error("mixture weights must be non-negative and sum to 1, got sum {sum}")]
    BadMixtureWeights { sum: f64 },

    #[error("target interval [{lo}, {hi}] is empty or unordered")]
    EmptyInterval { lo: f64, hi: f64 },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("target interval mass underflows: truncation lies too deep in the tail")]
    TailOverflow,

    #[error("observation direction is zero: the linearized observable carries no information")]
    ZeroDirection,

    #[error("model `{model}`: {reason}")]
    Model { model: String, reason: String },

    #[error("finite-difference probe returned a non-finite value in coordinate {coord}")]
    NonFiniteGradient { coord: usize },

    #[error("MAP solve did not converge after {iterations} iterations (gradient norm {grad_norm:.3e})")]
    MapNotConverged { iterations: usize, grad_norm: f64 },

    #[error("nominal component {index}: {source}")]
    Component {
        index: usize,
        #[source]
        source: Box<Error>,
    },
}
