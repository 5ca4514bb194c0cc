//! Crate-wide error type.

use thiserror::Error;

/// Errors raised by atom sets, oracles, subproblem solvers and geometry sweeps.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("exact LMO is not available for rank-one atom sets")]
    ExactLmoUnavailable,

    #[error("degenerate query: power iteration produced a zero factor pair")]
    DegenerateQuery,

    #[error("point is not in the conic hull of the atom set")]
    Infeasible,

    #[error("atom set exceeds the configured size limit ({limit}): {got}")]
    SetTooLarge { limit: usize, got: usize },

    #[error("invalid atom: {0}")]
    InvalidAtom(String),

    #[error("labels must be binary with both classes present")]
    InvalidLabels,

    #[error("objective or gradient produced a non-finite value at iteration {iter}")]
    NonFiniteValue { iter: usize },

    #[error("normal system is numerically singular beyond recovery")]
    SingularCorrection,

    #[error("inner cone subproblem failed at iteration {iter}: {source}")]
    SubproblemFailure {
        iter: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("inner solver exceeded {0} iterations without reaching its tolerance")]
    MaxIterationsExceeded(usize),

    #[error("direction must be non-zero")]
    ZeroDirection,

    #[error("reference point is not in the convex hull of any admissible subset")]
    NotInHull,

    #[error("atom set is not two-dimensional")]
    NotTwoDimensional,

    #[error("atom set must contain the origin for conic solvers")]
    OriginRequired,

    #[error("cone is degenerate (no non-zero atoms)")]
    DegenerateCone,

    #[error("linear span of the atom set is trivial")]
    DegenerateSet,

    #[error("a reference optimum is required for this check")]
    MissingReferenceOptimum,

    #[error("dataset not found: {0}")]
    DatasetNotFound(String),

    #[error("parse error in {context}: {message}")]
    Parse { context: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
