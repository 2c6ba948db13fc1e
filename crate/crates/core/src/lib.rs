//! Numerical laboratory for compression-based conditional-mutual-information
//! (CMI) generalization bounds.
//!
//! The crate builds the super-sample/membership machinery of the CMI setting,
//! a stochastic-projection + lossy-quantization compressor, Monte Carlo
//! estimators for every term of the compressed-CMI generalization bound, the
//! Gaussian-mixture entropy function driving the subspace SGLD bounds, and a
//! recall-game simulator for memorization analysis.
//!
//! Everything is deterministic given a [`seed::Seed`]: sampling operations are
//! pure functions of `(parameters, seed)`, and parallel Monte Carlo drivers
//! derive per-chunk seeds so results do not depend on scheduling.

pub mod bounds;
pub mod compress;
pub mod dist;
pub mod linalg;
pub mod mc;
pub mod memor;
pub mod mixent;
pub mod problems;
pub mod sample;
pub mod seed;
pub mod sgld;

pub use seed::Seed;

/// Library-wide error type.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("unsupported operation: {0}")]
    Unsupported(String),
    #[error("capacity exceeded: {0}")]
    Capacity(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("projection identity mismatch: expected token {expected}, got {got}")]
    ProjectionMismatch { expected: u64, got: u64 },
    #[error(
        "coupling bound violated at step {step}: gap {gap} > bound {bound} \
         (declared contraction constant is too small)"
    )]
    CouplingViolated { step: usize, gap: f64, bound: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
