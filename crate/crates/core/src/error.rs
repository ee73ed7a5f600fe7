use thiserror::Error;

/// Errors raised across the crate.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("matrix is not square: {rows}x{cols}")]
    NonSquare { rows: usize, cols: usize },

    #[error("matrix is not Hermitian (defect {defect:.3e})")]
    NotHermitian { defect: f64 },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("value out of range: {0}")]
    RangeError(String),

    #[error("POVM has no outcomes")]
    EmptyOutcomeList,

    #[error("invalid measurement: {0}")]
    InvalidMeasurement(String),

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("invalid assemblage: {0}")]
    InvalidAssemblage(String),

    #[error("unknown standard set `{0}`")]
    UnknownName(String),

    #[error("unknown decomposition class `{0}`")]
    UnknownClass(String),

    #[error("parent outcome count {count} exceeds the limit {limit}")]
    TooManyOutcomes { count: usize, limit: usize },

    #[error("deterministic strategy count {count} exceeds the limit {limit}")]
    TooManyStrategies { count: usize, limit: usize },

    #[error("{copies} copies requested, at most {limit} supported")]
    TooManyCopies { copies: usize, limit: usize },

    #[error("measurements are not jointly measurable at lambda = {lambda}")]
    NotJointlyMeasurable { lambda: f64 },

    #[error("no lambda in [0, 1] admits a decomposition at s = {s}")]
    NoDecomposition { s: f64 },

    #[error("marginal of the assemblage is not maximally mixed (deviation {deviation:.3e})")]
    MarginalNotMaximallyMixed { deviation: f64 },

    #[error("measurement {index} is biased (tr = {trace})")]
    BiasedMeasurement { index: usize, trace: f64 },

    #[error("Bob's marginal is not maximally mixed (deviation {deviation:.3e})")]
    NonMaximallyMixedMarginal { deviation: f64 },

    #[error("no convergence after {iterations} iterations (residual {residual:.3e})")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("numerical failure: {0}")]
    NumericalFailure(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("malformed input: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
