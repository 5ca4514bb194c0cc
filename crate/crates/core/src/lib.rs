//! Greedy matching-pursuit solvers for smooth convex minimization over the
//! conic hull of an atom set.
//!
//! The crate provides:
//! - [`atoms`]: atom sets (finite dictionaries and non-negative rank-one
//!   matrices) with exact and approximate linear minimization oracles, the
//!   atomic norm, and set geometry scalars;
//! - [`objectives`]: least-squares, matrix least-squares and non-negative
//!   garrote logistic objectives with analytic gradients and smoothness
//!   bounds, plus a finite-difference verifier;
//! - [`solvers`]: the greedy engines (plain and toward-origin matching
//!   pursuit, away-step/pairwise and fully corrective variants, and a
//!   rescaled Frank-Wolfe baseline), producing full per-iteration traces;
//! - [`coneproj`]: the inner solvers they delegate to: active-set
//!   non-negative least squares, projected gradient over a cone, and the
//!   dense gauge LP;
//! - [`geometry`]: the width constants behind the convergence rates, exact
//!   in 2D.

pub mod atoms;
pub mod coneproj;
pub mod error;
pub mod geometry;
pub mod linalg;
pub mod objectives;
pub mod solvers;

pub use atoms::{
    atomic_norm, diameter, lmo_approx, lmo_exact, radius, Atom, AtomId, AtomPayload, AtomSet,
    AtomSetKind, LmoAnswer,
};
pub use coneproj::{
    min_over_cone, nnls_cone, projected_gradient_cone, solve_gauge_lp, ConeSolveOutcome,
    ConicSubproblem,
};
pub use error::{Error, Result};
pub use geometry::{
    cone_width_2d, dir_width, mdw, mdw_report, pdir_width, theoretical_beta, Face2D,
    WidthCertificate, WidthKind, WidthMethod, WidthReport,
};
pub use objectives::{
    check_gradient, least_squares, logistic_garrote, matrix_ls, GarroteProblem, LeastSquares,
    LogisticGarrote, MatrixLs, Objective,
};
pub use solvers::{
    good_step_count, run_amp, run_amp_from, run_fcmp, run_fw_rescaled, run_gmp, run_nnmp,
    run_pwmp, run_pwmp_from, ActiveSet, FcmpVariant, GmpVariant, Normalization, SolverConfig,
    StepRecord, StepType, Trace, TraceMeta,
};
