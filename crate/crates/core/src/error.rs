use thiserror::Error;

/// Errors raised by measure construction and the solvers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("empty support")]
    EmptySupport,

    #[error("length mismatch: {points} points vs {weights} weights")]
    LengthMismatch { points: usize, weights: usize },

    #[error("point {index} has dimension {found}, expected {expected}")]
    DimensionMismatch {
        index: usize,
        expected: usize,
        found: usize,
    },

    #[error("non-finite value at index {index}")]
    NonFinite { index: usize },

    #[error("negative weight at index {index}: {value}")]
    NegativeWeight { index: usize, value: f64 },

    #[error("weights sum to {sum}, expected 1")]
    WeightSumMismatch { sum: f64 },

    #[error("duplicate support point at indices {first} and {second}")]
    DuplicatePoint { first: usize, second: usize },

    #[error("support of size {size} exceeds the limit {limit}")]
    SupportTooLarge { size: u128, limit: usize },

    #[error("coupling table violates marginals by {violation}")]
    MarginalViolation { violation: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("no convergence after {max_iters} iterations (residual {residual})")]
    NoConvergence { max_iters: usize, residual: f64 },

    #[error("numerical underflow: cost/regularization ratio too large, rescale the beta range")]
    NumericalUnderflow,

    #[error("bisection stalled after {iterations} iterations")]
    BisectionStall { iterations: usize },

    #[error("empty reproduction alphabet")]
    EmptyReproduction,

    #[error("distortion budget {budget} is below the minimum achievable {minimum}")]
    InfeasibleDistortion { budget: f64, minimum: f64 },

    #[error("multiplier grid produces a single distortion value")]
    DegenerateGrid,

    #[error("quadrature failed: {0}")]
    QuadratureFailure(String),

    #[error("type mismatch: {0}")]
    TypeMismatch(String),

    #[error("N*P has non-integer marginal {value} at {axis} {index}")]
    MarginalNotInteger {
        axis: &'static str,
        index: usize,
        value: f64,
    },

    #[error("codebook size {size} exceeds the cap {cap}")]
    CodebookTooLarge { size: f64, cap: u64 },

    #[error("blocklength {n} exceeds the exact-arithmetic guard {limit}")]
    Overflow { n: u64, limit: u64 },
}

pub type Result<T> = std::result::Result<T, Error>;
