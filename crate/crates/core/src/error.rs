use thiserror::Error;

/// Errors raised by operator construction and the detection protocols.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },

    #[error("invalid space dimensions: {0}")]
    InvalidDims(String),

    #[error("operator is not Hermitian (max |M - M^dagger| = {deviation:e})")]
    NotHermitian { deviation: f64 },

    #[error("trace is {trace}, expected 1")]
    TraceNotUnit { trace: f64 },

    #[error("operator is not positive semidefinite (min eigenvalue {min_eigenvalue:e})")]
    NotPositive { min_eigenvalue: f64 },

    #[error("operator is not unitary (max |U^dagger U - I| = {deviation:e})")]
    NotUnitary { deviation: f64 },

    #[error("Kraus map is not trace preserving (max |sum E^dagger E - I| = {deviation:e})")]
    NotTracePreserving { deviation: f64 },

    #[error("Kraus map has no operators")]
    EmptyKraus,

    #[error("entries must be finite")]
    NonFinite,

    #[error("eigensolver did not converge after {max_iterations} iterations")]
    NoConvergence { max_iterations: usize },

    #[error("invalid rank {rank} for dimension {dim}")]
    InvalidRank { rank: usize, dim: usize },

    #[error("state is uncorrelated")]
    Uncorrelated,

    #[error("states are identical")]
    IdenticalStates,

    #[error("spectrum is not saturable: n = {n} is not a multiple of d_E = {env_dim}")]
    NotSaturable { n: usize, env_dim: usize },

    #[error("environment marginals differ (max deviation {deviation:e})")]
    MarginalMismatch { deviation: f64 },

    #[error("system factor is correlated with the environment (deviation {deviation:e})")]
    SystemNotFactorized { deviation: f64 },

    #[error("Bloch vector ({x}, {y}, {z}) lies outside the unit ball")]
    InvalidBloch { x: f64, y: f64, z: f64 },

    #[error("chain of {spins} spins is outside the supported range 2..={max}")]
    ChainTooLarge { spins: usize, max: usize },

    #[error("invalid chain split: environment starts at spin {split} of {spins}")]
    InvalidSplit { split: usize, spins: usize },

    #[error("invalid time grid: {0}")]
    InvalidGrid(String),

    #[error("series order {order} exceeds the maximum of {max}")]
    OrderTooLarge { order: usize, max: usize },

    #[error("basis is ill-conditioned (condition number {condition:e})")]
    IllConditioned { condition: f64 },

    #[error("preparation map {index} does not produce basis state {index} (deviation {deviation:e})")]
    PreparationMismatch { index: usize, deviation: f64 },

    #[error("malformed operator file: {0}")]
    Parse(String),

    #[error("internal check failed: {0}")]
    Internal(String),
}

pub type Result<T> = std::result::Result<T, Error>;
