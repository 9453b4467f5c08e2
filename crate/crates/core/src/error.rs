use thiserror::Error;

use crate::lindblad::Trajectory;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid dimension {dim}: {reason}")]
    InvalidDimension { dim: usize, reason: String },

    #[error("index {index} out of range for dimension {dim}")]
    OutOfRange { index: usize, dim: usize },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("operator is not Hermitian (max |M - M^dag| = {deviation:e})")]
    NotHermitian { deviation: f64 },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("invalid density matrix: {0}")]
    InvalidState(String),

    #[error("integration failed at t = {t_reached}: {reason}")]
    IntegrationFailure {
        t_reached: f64,
        reason: String,
        partial: Option<Box<Trajectory>>,
    },

    #[error("steady state requires at least one dissipative channel")]
    NoChannels,

    #[error("null space of the Liouvillian has dimension {dim}; the steady state depends on the initial state, use the trajectory method")]
    DegenerateNullSpace { dim: usize },

    #[error("steady state not reached: {0}")]
    NonConvergence(String),

    #[error("reference state has zero negativity on this grid")]
    UndefinedReference,

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("adiabatic elimination precondition violated: {0}")]
    ScaleSeparation(String),

    #[error("configuration errors:\n  {}", .0.join("\n  "))]
    Config(Vec<String>),

    #[error("linear algebra failure: {0}")]
    Numerical(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
