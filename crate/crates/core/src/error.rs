use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("price at index {index} is not positive ({value})")]
    NonPositivePrice { index: usize, value: f64 },

    #[error("budget must be nonnegative, got {0}")]
    NegativeBudget(f64),

    #[error("bundle is infeasible: {0}")]
    InfeasibleBundle(String),

    #[error("vector is not unit length (norm {0})")]
    NotUnit(f64),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("result overflows the scalar type: {0}")]
    Overflow(String),

    #[error("rejection sampler exceeded {0} proposals")]
    SamplerExhausted(usize),

    #[error("quadrature did not converge (estimated error {0:e})")]
    QuadratureFailed(f64),

    #[error("coordinate {0} never observed under the design")]
    CoordinateUnobserved(usize),

    #[error("exhausted {0} draws without a non-degenerate sample")]
    DegenerateSamples(usize),
}

pub type Result<T> = std::result::Result<T, Error>;
