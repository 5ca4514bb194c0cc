//! Greedy iteration engines over `(AtomSet, Objective)` pairs.
//!
//! All conic solvers start at the origin and keep every weight
//! non-negative, so iterates stay in `cone(A)` by construction. Step sizes
//! minimize the quadratic upper bound `f(x) + <grad, d> gamma +
//! (L/2) ||d||^2 gamma^2`, which never increases the objective. Termination
//! fires when the selected direction's score clears `-tol`, which is the
//! machine-checkable form of the stationarity certificate (the full-set
//! oracle finds no descent atom and the toward-origin direction does not
//! descend either).

mod active_set;
mod trace;

pub use active_set::ActiveSet;
pub use trace::{StepRecord, StepType, Trace, TraceMeta};

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::atoms::{lmo_approx, Atom, AtomSet, LmoAnswer};
use crate::coneproj;
use crate::error::{Error, Result};
use crate::linalg;
use crate::objectives::Objective;

/// Normalization of the toward-origin direction `-x / ||x||`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    /// `||x||_2`; the cheap practical choice and the default.
    Euclidean,
    /// `||x||_A` via the gauge LP; gives the rate-exact direction scores on
    /// small dictionaries.
    AtomicNorm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GmpVariant {
    /// Single-atom step along the oracle direction.
    Norm0,
    /// Least-squares refit over the span of all selected atoms.
    Norm1,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FcmpVariant {
    /// Project the gradient-descent target onto `cone(S)`.
    V0,
    /// Minimize the objective itself over `cone(S)`.
    V1,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolverConfig {
    pub max_iters: usize,
    /// Termination tolerance on the selected direction's score.
    /// `None` resolves to `1e-10 * (1 + |f(x_0)|)` at run start.
    pub tol: Option<f64>,
    /// Quality reported by approximate oracles.
    pub delta: f64,
    pub normalization: Normalization,
    /// Weights at or below this are pruned from the active set.
    pub prune_eps: f64,
    pub seed: u64,
    /// Rounds of the truncated power iteration for rank-one oracles.
    pub lmo_iters: usize,
    /// Keep per-iterate snapshots in the trace (needed by gauge-LP checks).
    pub record_iterates: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            max_iters: 1000,
            tol: None,
            delta: 1.0,
            normalization: Normalization::Euclidean,
            prune_eps: 1e-12,
            seed: 0,
            lmo_iters: 200,
            record_iterates: false,
        }
    }
}

impl SolverConfig {
    pub fn resolve_tol(&self, f0: f64) -> f64 {
        self.tol.unwrap_or(1e-10 * (1.0 + f0.abs()))
    }
}

/// Count of good steps in a trace (`k(t)` in the rate statements): steps
/// whose line search was not clipped by an active weight. Full corrections
/// of the objective-minimizing variant are always good.
pub fn good_step_count(trace: &Trace) -> usize {
    trace.good_step_count()
}

// ---------------------------------------------------------------------------
// shared run bookkeeping

struct Run<'a> {
    obj: &'a dyn Objective,
    cfg: &'a SolverConfig,
    active: ActiveSet,
    records: Vec<StepRecord>,
    coeff_sums: Vec<f64>,
    iterates: Option<Vec<Vec<f64>>>,
    tol: f64,
    f_current: f64,
    terminated: bool,
    start: Instant,
}

impl<'a> Run<'a> {
    fn start(
        obj: &'a dyn Objective,
        set: &AtomSet,
        cfg: &'a SolverConfig,
        init: Option<ActiveSet>,
        signed: bool,
    ) -> Result<Self> {
        let dim = set.ambient_dim();
        if obj.dim() != dim {
            return Err(Error::DimensionMismatch { expected: dim, got: obj.dim() });
        }
        let active = match init {
            Some(a) => a,
            None if signed => ActiveSet::new_signed(dim, cfg.prune_eps),
            None => ActiveSet::new(dim, cfg.prune_eps),
        };
        let f0 = obj.eval(active.iterate());
        if !f0.is_finite() {
            return Err(Error::NonFiniteValue { iter: 0 });
        }
        let tol = cfg.resolve_tol(f0);
        let mut run = Run {
            obj,
            cfg,
            active,
            records: Vec::new(),
            coeff_sums: Vec::new(),
            iterates: if cfg.record_iterates { Some(Vec::new()) } else { None },
            tol,
            f_current: f0,
            terminated: false,
            start: Instant::now(),
        };
        run.snapshot();
        Ok(run)
    }

    fn snapshot(&mut self) {
        self.coeff_sums.push(self.active.coeff_sum());
        if let Some(iters) = &mut self.iterates {
            iters.push(self.active.iterate().to_vec());
        }
    }

    fn grad(&self, iter: usize) -> Result<Vec<f64>> {
        let g = self.obj.grad(self.active.iterate());
        if !linalg::all_finite(&g) {
            return Err(Error::NonFiniteValue { iter });
        }
        Ok(g)
    }

    fn record(&mut self, iter: usize, step_type: StepType, gamma: f64, clipped: bool, good: bool, lmo_score: f64) {
        self.records.push(StepRecord {
            iter,
            f_value: self.f_current,
            step_type,
            gamma,
            gamma_was_clipped: clipped,
            good_step: good,
            active_size: self.active.len(),
            lmo_score,
        });
    }

    fn after_step(&mut self, iter: usize) -> Result<()> {
        self.f_current = self.obj.eval(self.active.iterate());
        if !self.f_current.is_finite() {
            return Err(Error::NonFiniteValue { iter });
        }
        self.snapshot();
        Ok(())
    }

    fn terminate(&mut self, iter: usize, lmo_score: f64) {
        self.record(iter, StepType::Terminated, 0.0, false, false, lmo_score);
        self.terminated = true;
    }

    fn finish(self, solver: &str, set: &AtomSet) -> Trace {
        let rho = self.coeff_sums.iter().cloned().fold(0.0f64, f64::max);
        let meta = TraceMeta {
            solver: solver.to_string(),
            objective: self.obj.name().to_string(),
            atom_set: set.describe(),
            config: self.cfg.clone(),
            rho_coeff_sum: rho,
            min_weight_seen: self.active.min_weight_seen(),
            final_f: self.f_current,
            terminated: self.terminated,
            wall_time_ms: self.start.elapsed().as_secs_f64() * 1e3,
        };
        Trace {
            records: self.records,
            final_active: self.active,
            coeff_sums: self.coeff_sums,
            iterates: self.iterates,
            meta,
        }
    }
}

/// Oracle query; a degenerate approximate answer (no improving atom exists)
/// comes back as `None` and the caller falls through to the remaining
/// candidate directions.
fn query_lmo(grad: &[f64], set: &AtomSet, cfg: &SolverConfig) -> Result<Option<LmoAnswer>> {
    match lmo_approx(grad, set, cfg.delta, cfg.lmo_iters) {
        Ok(ans) => Ok(Some(ans)),
        Err(Error::DegenerateQuery) => Ok(None),
        Err(e) => Err(e),
    }
}

// ---------------------------------------------------------------------------
// norm-corrective generalized matching pursuit (span baseline)

/// Matching-pursuit baseline over `lin(A)`. Variant 0 steps along the
/// oracle atom with `gamma = <-grad, z> / (L ||z||^2)`; Variant 1 refits
/// `x` as the least-squares projection of `x - grad/L` onto the span of all
/// selected atoms. Stops when `|lmo score| <= tol`.
pub fn run_gmp(
    obj: &dyn Objective,
    set: &AtomSet,
    cfg: &SolverConfig,
    variant: GmpVariant,
) -> Result<Trace> {
    if set.atoms().is_none() {
        return Err(Error::ExactLmoUnavailable);
    }
    let signed = matches!(variant, GmpVariant::Norm1);
    let mut run = Run::start(obj, set, cfg, None, signed)?;
    let l = obj.smoothness();
    let mut selected: Vec<Atom> = Vec::new();

    for t in 0..cfg.max_iters {
        let grad = run.grad(t)?;
        let ans = crate::atoms::lmo_exact(&grad, set)?;
        if ans.score.abs() <= run.tol {
            run.terminate(t, ans.score);
            break;
        }
        match variant {
            GmpVariant::Norm0 => {
                let gamma = -ans.score / (l * ans.atom.norm_sq());
                run.record(t, StepType::Regular, gamma, false, true, ans.score);
                run.active.add_weight(&ans.atom, gamma);
            }
            GmpVariant::Norm1 => {
                if !selected.iter().any(|a| a.id() == ans.atom.id()) {
                    selected.push(ans.atom.clone());
                }
                let mut b = run.active.iterate().to_vec();
                linalg::axpy(-1.0 / l, &grad, &mut b);
                let weights = span_least_squares(&selected, &b)?;
                run.record(t, StepType::FullCorrection, 0.0, false, true, ans.score);
                run.active.set_weights(&selected, &weights);
            }
        }
        run.after_step(t)?;
    }
    Ok(run.finish(match variant {
        GmpVariant::Norm0 => "gmp_v0",
        GmpVariant::Norm1 => "gmp_v1",
    }, set))
}

/// Normal-equation solve of `min_w ||sum w_i a_i - b||`. Rank-deficient
/// selections fall back to the minimum-norm weights, which reconstruct the
/// same projection.
fn span_least_squares(atoms: &[Atom], b: &[f64]) -> Result<Vec<f64>> {
    let n = atoms.len();
    let mut g = ndarray::Array2::<f64>::zeros((n, n));
    for i in 0..n {
        for j in i..n {
            let v = atoms[i].dot_atom(&atoms[j]);
            g[[i, j]] = v;
            g[[j, i]] = v;
        }
    }
    let rhs: Vec<f64> = atoms.iter().map(|a| a.dot_point(b)).collect();
    let w = match linalg::solve_spd(&g, &rhs, 1e-13) {
        Some(w) => w,
        None => linalg::solve_psd_min_norm(&g, &rhs),
    };
    if !linalg::all_finite(&w) {
        return Err(Error::SingularCorrection);
    }
    Ok(w)
}

// ---------------------------------------------------------------------------
// non-negative matching pursuit

/// Greedy conic solver: each iteration compares the oracle atom with the
/// toward-origin direction `-x/||x||` (omitted at the origin), steps along
/// the better of the two with the closed-form `gamma`, and terminates when
/// neither direction descends more than `tol`. Steps need no clipping: the
/// descent invariant keeps the toward-origin line search inside the segment
/// to the origin.
pub fn run_nnmp(obj: &dyn Objective, set: &AtomSet, cfg: &SolverConfig) -> Result<Trace> {
    if !set.contains_origin() {
        return Err(Error::OriginRequired);
    }
    let mut run = Run::start(obj, set, cfg, None, false)?;
    let l = obj.smoothness();

    for t in 0..cfg.max_iters {
        let grad = run.grad(t)?;
        let answer = query_lmo(&grad, set, cfg)?;
        let z_score = answer.as_ref().map(|a| a.score);

        // Toward-origin candidate, normalized per config; absent at x = 0.
        let x = run.active.iterate();
        let xnorm_sq = linalg::norm_sq(x);
        let origin = if run.active.is_empty() || xnorm_sq == 0.0 {
            None
        } else {
            let measure = match cfg.normalization {
                Normalization::Euclidean => xnorm_sq.sqrt(),
                Normalization::AtomicNorm => crate::atoms::atomic_norm(x, set)?,
            };
            let score = -linalg::dot(&grad, x) / measure;
            Some((measure, score))
        };

        let z_improves = z_score.is_some_and(|s| s < -run.tol);
        let o_improves = origin.is_some_and(|(_, s)| s < -run.tol);
        if !z_improves && !o_improves {
            run.terminate(t, z_score.unwrap_or(f64::NAN));
            break;
        }

        // Pick the smaller score; the oracle atom wins ties.
        let take_origin = match (z_score, origin) {
            (Some(zs), Some((_, os))) => o_improves && os < zs,
            (None, Some(_)) => true,
            _ => false,
        };
        if take_origin {
            let (measure, o_score) = origin.expect("origin candidate present");
            // direction -x/measure has squared norm ||x||^2 / measure^2
            let dir_norm_sq = xnorm_sq / (measure * measure);
            let gamma = -o_score / (l * dir_norm_sq);
            let factor = 1.0 - gamma / measure;
            run.record(t, StepType::TowardOrigin, gamma, false, true, z_score.unwrap_or(f64::NAN));
            run.active.scale_all(factor);
        } else {
            let ans = answer.expect("oracle atom present");
            let gamma = -ans.score / (l * ans.atom.norm_sq());
            run.record(t, StepType::Regular, gamma, false, true, ans.score);
            run.active.add_weight(&ans.atom, gamma);
        }
        run.after_step(t)?;
    }
    Ok(run.finish("nnmp", set))
}

// ---------------------------------------------------------------------------
// away-step and pairwise variants

#[derive(Clone, Copy)]
enum CorrectiveMode {
    Away,
    Pairwise,
}

pub fn run_amp(obj: &dyn Objective, set: &AtomSet, cfg: &SolverConfig) -> Result<Trace> {
    corrective_run(obj, set, cfg, CorrectiveMode::Away, None)
}

pub fn run_pwmp(obj: &dyn Objective, set: &AtomSet, cfg: &SolverConfig) -> Result<Trace> {
    corrective_run(obj, set, cfg, CorrectiveMode::Pairwise, None)
}

/// Pairwise run from a caller-seeded active set (weights must be
/// non-negative); used to exercise drop-step behavior.
pub fn run_pwmp_from(
    obj: &dyn Objective,
    set: &AtomSet,
    cfg: &SolverConfig,
    init: ActiveSet,
) -> Result<Trace> {
    corrective_run(obj, set, cfg, CorrectiveMode::Pairwise, Some(init))
}

pub fn run_amp_from(
    obj: &dyn Objective,
    set: &AtomSet,
    cfg: &SolverConfig,
    init: ActiveSet,
) -> Result<Trace> {
    corrective_run(obj, set, cfg, CorrectiveMode::Away, Some(init))
}

/// Per iteration: `z` from the oracle over `A`, `v` the worst active atom
/// (largest `<grad, v>`). The away candidate only matters when its score is
/// strictly positive; otherwise transferring weight out of `v` cannot
/// descend and the step is a plain oracle step (the paper's active set
/// formally carries the origin, which always scores zero). Clipped steps
/// (`gamma = alpha_v`) drop `v` from the active set and do not count as
/// good steps.
fn corrective_run(
    obj: &dyn Objective,
    set: &AtomSet,
    cfg: &SolverConfig,
    mode: CorrectiveMode,
    init: Option<ActiveSet>,
) -> Result<Trace> {
    if !set.contains_origin() {
        return Err(Error::OriginRequired);
    }
    let mut run = Run::start(obj, set, cfg, init, false)?;
    let l = obj.smoothness();

    for t in 0..cfg.max_iters {
        let grad = run.grad(t)?;
        let answer = query_lmo(&grad, set, cfg)?;
        let z_score = answer.as_ref().map(|a| a.score);
        let away = run.active.max_score(&grad).filter(|(_, s)| *s > 0.0);

        enum Dir {
            Regular(Atom, f64),
            AwayFrom(Atom, f64),
            Swap { z: Atom, v: Atom, score: f64 },
        }

        let dir = match mode {
            CorrectiveMode::Pairwise => match (&answer, &away) {
                (Some(z), Some((v, vs))) => {
                    Some(Dir::Swap { z: z.atom.clone(), v: v.clone(), score: z.score - vs })
                }
                (Some(z), None) => Some(Dir::Regular(z.atom.clone(), z.score)),
                (None, Some((v, vs))) => Some(Dir::AwayFrom(v.clone(), -vs)),
                (None, None) => None,
            },
            CorrectiveMode::Away => {
                let reg = answer.as_ref().map(|z| (z.atom.clone(), z.score));
                let aw = away.as_ref().map(|(v, vs)| (v.clone(), -vs));
                match (reg, aw) {
                    (Some((z, zs)), Some((v, as_))) => {
                        // tie prefers the regular step
                        if as_ < zs {
                            Some(Dir::AwayFrom(v, as_))
                        } else {
                            Some(Dir::Regular(z, zs))
                        }
                    }
                    (Some((z, zs)), None) => Some(Dir::Regular(z, zs)),
                    (None, Some((v, as_))) => Some(Dir::AwayFrom(v, as_)),
                    (None, None) => None,
                }
            }
        };

        let Some(dir) = dir else {
            run.terminate(t, f64::NAN);
            break;
        };
        let dir_score = match &dir {
            Dir::Regular(_, s) | Dir::AwayFrom(_, s) => *s,
            Dir::Swap { score, .. } => *score,
        };
        if dir_score >= -run.tol {
            run.terminate(t, z_score.unwrap_or(f64::NAN));
            break;
        }

        let (dir_norm_sq, gamma_max) = match &dir {
            Dir::Regular(z, _) => (z.norm_sq(), f64::INFINITY),
            Dir::AwayFrom(v, _) => (v.norm_sq(), run.active.weight(v.id())),
            Dir::Swap { z, v, .. } => {
                let nsq = z.norm_sq() + v.norm_sq() - 2.0 * z.dot_atom(v);
                (nsq, run.active.weight(v.id()))
            }
        };
        if dir_norm_sq <= 1e-300 {
            // z and v coincide; no direction left (certificate).
            run.terminate(t, z_score.unwrap_or(f64::NAN));
            break;
        }
        let gamma_unclipped = -dir_score / (l * dir_norm_sq);
        let clipped = gamma_unclipped >= gamma_max;
        let gamma = if clipped { gamma_max } else { gamma_unclipped };

        let (step_type, good) = if clipped {
            (StepType::Drop, false)
        } else {
            match &dir {
                Dir::Regular(..) => (StepType::Regular, true),
                Dir::AwayFrom(..) => (StepType::Away, true),
                Dir::Swap { .. } => (StepType::Pairwise, true),
            }
        };
        run.record(t, step_type, gamma, clipped, good, z_score.unwrap_or(f64::NAN));

        match dir {
            Dir::Regular(z, _) => run.active.add_weight(&z, gamma),
            Dir::AwayFrom(v, _) => run.active.add_weight(&v, -gamma),
            Dir::Swap { z, v, .. } => {
                run.active.add_weight(&z, gamma);
                run.active.add_weight(&v, -gamma);
            }
        }
        run.after_step(t)?;
    }
    Ok(run.finish(match mode {
        CorrectiveMode::Away => "amp",
        CorrectiveMode::Pairwise => "pwmp",
    }, set))
}

// ---------------------------------------------------------------------------
// fully corrective variant

/// Each iteration adds the oracle atom to the active set and refits all
/// weights over `cone(S)`: variant 0 projects the gradient-descent target,
/// variant 1 minimizes the objective itself. Zero-weight atoms are removed
/// after the refit. Terminates on the stationarity certificate (no oracle
/// descent and `<grad, -x> >= -tol ||x||`).
pub fn run_fcmp(
    obj: &dyn Objective,
    set: &AtomSet,
    cfg: &SolverConfig,
    variant: FcmpVariant,
) -> Result<Trace> {
    if !set.contains_origin() {
        return Err(Error::OriginRequired);
    }
    let mut run = Run::start(obj, set, cfg, None, false)?;
    let l = obj.smoothness();
    let mut selected: Vec<Atom> = Vec::new();
    let mut weights: Vec<f64> = Vec::new();
    let inner_tol = (0.01 * run.tol).clamp(1e-13, 1e-6);
    let inner_max = 50_000;

    for t in 0..cfg.max_iters {
        let grad = run.grad(t)?;
        let answer = query_lmo(&grad, set, cfg)?;
        let z_score = answer.as_ref().map(|a| a.score);

        let x = run.active.iterate();
        let origin_certified =
            -linalg::dot(&grad, x) >= -run.tol * linalg::norm(x);
        let z_improves = z_score.is_some_and(|s| s < -run.tol);
        if !z_improves && origin_certified {
            run.terminate(t, z_score.unwrap_or(f64::NAN));
            break;
        }
        if z_improves {
            let atom = answer.as_ref().expect("answer present").atom.clone();
            if !selected.iter().any(|a| a.id() == atom.id()) {
                selected.push(atom);
                weights.push(0.0);
            }
        }
        if selected.is_empty() {
            run.terminate(t, z_score.unwrap_or(f64::NAN));
            break;
        }

        let outcome = match variant {
            FcmpVariant::V0 => {
                let mut b = run.active.iterate().to_vec();
                linalg::axpy(-1.0 / l, &grad, &mut b);
                coneproj::nnls_cone(&selected, &b, Some(&weights), inner_tol)
            }
            FcmpVariant::V1 => {
                coneproj::min_over_cone(&selected, obj, Some(&weights), inner_tol, inner_max)
            }
        }
        .map_err(|e| Error::SubproblemFailure { iter: t, source: Box::new(e) })?;

        weights = outcome.weights;
        run.record(t, StepType::FullCorrection, 0.0, false, true, z_score.unwrap_or(f64::NAN));
        run.active.set_weights(&selected, &weights);
        // Drop zero-weight atoms from the working set as well.
        let keep: Vec<bool> = weights.iter().map(|&w| w > cfg.prune_eps).collect();
        let mut i = 0;
        selected.retain(|_| {
            let k = keep[i];
            i += 1;
            k
        });
        weights.retain(|&w| w > cfg.prune_eps);
        run.after_step(t)?;
    }
    Ok(run.finish(match variant {
        FcmpVariant::V0 => "fcmp_v0",
        FcmpVariant::V1 => "fcmp_v1",
    }, set))
}

// ---------------------------------------------------------------------------
// rescaled Frank-Wolfe baseline

/// Standard Frank-Wolfe over `conv(tau * A)` with the quadratic-bound line
/// search clipped to `[0, 1]` (exact for least squares). A baseline: with
/// `tau` below the atomic norm of the conic optimum it cannot reach it.
pub fn run_fw_rescaled(
    obj: &dyn Objective,
    set: &AtomSet,
    tau: f64,
    cfg: &SolverConfig,
) -> Result<Trace> {
    assert!(tau > 0.0, "tau must be positive");
    let scaled = set.scaled(tau)?;
    let mut run = Run::start(obj, &scaled, cfg, None, false)?;
    let l = obj.smoothness();

    for t in 0..cfg.max_iters {
        let grad = run.grad(t)?;
        let ans = crate::atoms::lmo_exact(&grad, &scaled)?;
        let x = run.active.iterate();
        let gap = -ans.score + linalg::dot(&grad, x);
        if gap <= run.tol {
            run.terminate(t, ans.score);
            break;
        }
        let dir_norm_sq =
            ans.atom.norm_sq() - 2.0 * ans.atom.dot_point(x) + linalg::norm_sq(x);
        let gamma_unclipped = gap / (l * dir_norm_sq);
        let clipped = gamma_unclipped >= 1.0;
        let gamma = gamma_unclipped.min(1.0);
        run.record(t, StepType::Regular, gamma, clipped, true, ans.score);
        run.active.scale_all(1.0 - gamma);
        run.active.add_weight(&ans.atom, gamma);
        run.after_step(t)?;
    }
    Ok(run.finish("fw_rescaled", &scaled))
}
