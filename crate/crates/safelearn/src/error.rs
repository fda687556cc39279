//! Crate-wide error type.
//!
//! Every fallible operation returns [`Error`]. Variants are deliberately
//! coarse: callers mostly branch on *kind* (is the bound valid yet? is the
//! configuration incomplete?) rather than on details, which live in the
//! message fields.

use thiserror::Error;

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

/// All failure modes of the toolkit.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// Vector/matrix sizes do not line up with the declared dimensions.
    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    DimensionMismatch {
        context: &'static str,
        expected: String,
        actual: String,
    },

    /// A confidence bound was requested below its minimum sample count.
    /// The finite-sample guarantees are void below `min_t`, so this is a hard
    /// error rather than a warning.
    #[error("bound not valid yet: have t = {t} samples, need t >= {min_t}")]
    BoundNotValidYet { t: u64, min_t: u64 },

    /// An estimate was read out before enough samples were seen (e.g. a
    /// sample covariance with fewer than two observations).
    #[error("not enough samples: have {have}, need {need}")]
    NotEnoughSamples { have: u64, need: u64 },

    /// A neighbor-informed bound referenced regions that have not collected
    /// the required sample counts; `offending` lists their indices.
    #[error("neighbor regions below the required sample count: {offending:?}")]
    NeighborsNotReady { offending: Vec<usize> },

    /// Missing or inconsistent configuration (e.g. a bound that needs the
    /// uniform covariance bound sigma, with no sigma provided). Absence of a
    /// required constant is an error, never a silent default.
    #[error("configuration error: {0}")]
    ConfigError(String),

    /// An estimator update or read-out that does not match the estimator's
    /// mode (zero-mean vs non-zero-mean vs paired-measurement).
    #[error("estimator mode mismatch: expected {expected}, got {actual}")]
    WrongMode {
        expected: &'static str,
        actual: &'static str,
    },

    /// A query outside the supported domain (e.g. a position outside the
    /// spatial grid's bounding box).
    #[error("out of domain: {0}")]
    OutOfDomain(String),

    /// The QP solver failed to converge or hit a numerical degeneracy.
    #[error("solver error: {0}")]
    SolverError(String),

    /// A type invariant was violated at construction (zero constraint row,
    /// indefinite shape matrix beyond tolerance, non-finite input, ...).
    #[error("contract violation: {0}")]
    ContractViolation(String),
}
