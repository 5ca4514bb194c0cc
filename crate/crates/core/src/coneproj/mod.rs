//! Constrained subproblems behind the solvers: non-negative least squares
//! over `cone(S)`, smooth minimization over `cone(S)`, and the small dense
//! LP behind the atomic norm.
//!
//! Everything works through Gram matrices, so rank-one atoms never have to
//! be materialized. All routines are deterministic: identical inputs give
//! bit-identical outputs.

mod simplex;

use ndarray::Array2;

use crate::atoms::Atom;
use crate::error::{Error, Result};
use crate::linalg;
use crate::objectives::Objective;

pub use simplex::SimplexSolution;

/// One conic subproblem instance: the active atoms, an optional warm start,
/// and the stopping controls the caller wants.
#[derive(Debug, Clone)]
pub struct ConicSubproblem<'a> {
    pub atoms: &'a [Atom],
    pub warm_start: Option<&'a [f64]>,
    pub tol: f64,
    pub max_iters: usize,
}

impl<'a> ConicSubproblem<'a> {
    pub fn new(atoms: &'a [Atom], warm_start: Option<&'a [f64]>, tol: f64, max_iters: usize) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::InvalidAtom("subproblem needs at least one atom".into()));
        }
        if let Some(w) = warm_start {
            if w.len() != atoms.len() {
                return Err(Error::DimensionMismatch { expected: atoms.len(), got: w.len() });
            }
            if !linalg::all_finite(w) || w.iter().any(|&x| x < 0.0) {
                return Err(Error::InvalidAtom("warm start must be finite and non-negative".into()));
            }
        }
        Ok(ConicSubproblem { atoms, warm_start, tol, max_iters })
    }
}

/// Result of an inner solve. `converged` is false when the iteration cap was
/// hit; the weights are still the best feasible point found.
#[derive(Debug, Clone)]
pub struct ConeSolveOutcome {
    pub weights: Vec<f64>,
    pub kkt_residual: f64,
    pub inner_iters: usize,
    pub converged: bool,
}

fn gram_and_rhs(atoms: &[Atom], b: &[f64]) -> (Array2<f64>, Vec<f64>) {
    let n = atoms.len();
    let mut g = Array2::<f64>::zeros((n, n));
    for i in 0..n {
        for j in i..n {
            let v = atoms[i].dot_atom(&atoms[j]);
            g[[i, j]] = v;
            g[[j, i]] = v;
        }
    }
    let c = atoms.iter().map(|a| a.dot_point(b)).collect();
    (g, c)
}

fn solve_on_passive(g: &Array2<f64>, c: &[f64], passive: &[usize]) -> Vec<f64> {
    let k = passive.len();
    let mut gp = Array2::<f64>::zeros((k, k));
    let mut cp = vec![0.0; k];
    for (ii, &i) in passive.iter().enumerate() {
        cp[ii] = c[i];
        for (jj, &j) in passive.iter().enumerate() {
            gp[[ii, jj]] = g[[i, j]];
        }
    }
    match linalg::solve_spd(&gp, &cp, 1e-13) {
        Some(z) => z,
        // Collinear active atoms make the passive Gram singular; fall back
        // to the minimum-norm least-squares weights, which reconstruct the
        // same projected point.
        None => linalg::solve_psd_min_norm(&gp, &cp),
    }
}

/// Non-negative least squares over the cone of the given atoms:
/// `min ||sum_i alpha_i a_i - b||^2, alpha >= 0`, by a Lawson-Hanson style
/// active-set method on the Gram system. At exit every gradient component
/// `g_i = <a_i, sum_j alpha_j a_j - b>` satisfies `g_i >= -tol`, and
/// `|g_i| <= tol` wherever `alpha_i > 0`.
pub fn nnls_cone(
    atoms: &[Atom],
    b: &[f64],
    warm_start: Option<&[f64]>,
    tol: f64,
) -> Result<ConeSolveOutcome> {
    let sub = ConicSubproblem::new(atoms, warm_start, tol, 6 * atoms.len() + 60)?;
    let n = atoms.len();
    let (g, c) = gram_and_rhs(atoms, b);

    let mut alpha = vec![0.0f64; n];
    let mut in_passive = vec![false; n];
    if let Some(w) = sub.warm_start {
        alpha.copy_from_slice(w);
        for (i, &wi) in w.iter().enumerate() {
            in_passive[i] = wi > 0.0;
        }
    }

    let grad = |alpha: &[f64]| -> Vec<f64> {
        let n = alpha.len();
        let mut out = vec![0.0; n];
        for i in 0..n {
            let mut acc = -c[i];
            for j in 0..n {
                acc += g[[i, j]] * alpha[j];
            }
            out[i] = acc;
        }
        out
    };

    let mut iters = 0usize;
    let mut converged = false;
    while iters < sub.max_iters {
        iters += 1;
        // Restore the passive-set optimum, clipping along the way.
        inner_restore(&g, &c, &mut alpha, &mut in_passive, sub.max_iters);

        // Entering test on the dual: w_i = -(G alpha - c)_i.
        let gr = grad(&alpha);
        let mut enter = None;
        for i in 0..n {
            if !in_passive[i] && -gr[i] > sub.tol {
                match enter {
                    None => enter = Some(i),
                    Some(e) if -gr[i] > -gr[e] => enter = Some(i),
                    _ => {}
                }
            }
        }
        match enter {
            None => {
                converged = true;
                break;
            }
            Some(i) => in_passive[i] = true,
        }
    }

    let gr = grad(&alpha);
    let mut kkt = 0.0f64;
    for i in 0..n {
        kkt = kkt.max(-gr[i]);
        if alpha[i] > 0.0 {
            kkt = kkt.max(gr[i].abs());
        }
    }
    Ok(ConeSolveOutcome { weights: alpha, kkt_residual: kkt.max(0.0), inner_iters: iters, converged })
}

/// Solve the unconstrained problem on the passive set and walk the current
/// feasible point toward it, dropping variables that hit zero.
fn inner_restore(
    g: &Array2<f64>,
    c: &[f64],
    alpha: &mut [f64],
    in_passive: &mut [bool],
    max_rounds: usize,
) {
    for _ in 0..max_rounds {
        let passive: Vec<usize> = (0..alpha.len()).filter(|&i| in_passive[i]).collect();
        if passive.is_empty() {
            for a in alpha.iter_mut() {
                *a = 0.0;
            }
            return;
        }
        let z = solve_on_passive(g, c, &passive);
        if z.iter().all(|&zi| zi > 0.0) {
            for a in alpha.iter_mut() {
                *a = 0.0;
            }
            for (ii, &i) in passive.iter().enumerate() {
                alpha[i] = z[ii];
            }
            return;
        }
        // Interpolate from the feasible alpha toward z until a coordinate
        // hits zero, then drop it from the passive set.
        let mut theta = 1.0f64;
        let mut drop_idx = None;
        for (ii, &i) in passive.iter().enumerate() {
            if z[ii] <= 0.0 {
                let denom = alpha[i] - z[ii];
                let step = if denom > 0.0 { alpha[i] / denom } else { 0.0 };
                if step < theta {
                    theta = step;
                    drop_idx = Some(i);
                }
            }
        }
        for (ii, &i) in passive.iter().enumerate() {
            alpha[i] += theta * (z[ii] - alpha[i]);
            if alpha[i] < 0.0 {
                alpha[i] = 0.0;
            }
        }
        match drop_idx {
            Some(i) => {
                alpha[i] = 0.0;
                in_passive[i] = false;
            }
            None => return,
        }
    }
}

/// Smooth convex minimization over `cone(S)` by projected gradient on the
/// weights with fixed step `1/L_alpha`, where `L_alpha = L * trace(Gram)`
/// upper-bounds the weight-space smoothness. Least-squares objectives
/// delegate to [`nnls_cone`], which terminates exactly.
pub fn min_over_cone(
    atoms: &[Atom],
    objective: &dyn Objective,
    warm_start: Option<&[f64]>,
    tol: f64,
    max_iters: usize,
) -> Result<ConeSolveOutcome> {
    if let Some(target) = objective.least_squares_target() {
        return nnls_cone(atoms, &target, warm_start, tol);
    }
    projected_gradient_cone(atoms, objective, warm_start, tol, max_iters)
}

/// The projected-gradient engine behind [`min_over_cone`]. Public so checks
/// can run it against the active-set route independently.
pub fn projected_gradient_cone(
    atoms: &[Atom],
    objective: &dyn Objective,
    warm_start: Option<&[f64]>,
    tol: f64,
    max_iters: usize,
) -> Result<ConeSolveOutcome> {
    let sub = ConicSubproblem::new(atoms, warm_start, tol, max_iters)?;
    let n = atoms.len();
    let dim = atoms[0].ambient_dim();

    let trace: f64 = atoms.iter().map(Atom::norm_sq).sum();
    let l_alpha = (objective.smoothness() * trace).max(1e-300);

    let mut alpha = match sub.warm_start {
        Some(w) => w.to_vec(),
        None => vec![0.0; n],
    };
    let reconstruct = |alpha: &[f64]| -> Vec<f64> {
        let mut x = vec![0.0; dim];
        for (a, &w) in atoms.iter().zip(alpha.iter()) {
            if w != 0.0 {
                a.add_scaled_into(w, &mut x);
            }
        }
        x
    };

    let mut x = reconstruct(&alpha);
    let mut best_alpha = alpha.clone();
    let mut best_f = objective.eval(&x);
    let mut iters = 0usize;
    let mut converged = false;
    let mut kkt = f64::INFINITY;

    while iters < sub.max_iters {
        let grad_x = objective.grad(&x);
        let ga: Vec<f64> = atoms.iter().map(|a| a.dot_point(&grad_x)).collect();
        let pg_norm = alpha
            .iter()
            .zip(&ga)
            .map(|(&ai, &gi)| if ai > 0.0 { gi * gi } else { gi.min(0.0).powi(2) })
            .sum::<f64>()
            .sqrt();
        kkt = pg_norm;
        if pg_norm <= sub.tol {
            converged = true;
            break;
        }
        iters += 1;
        for (ai, &gi) in alpha.iter_mut().zip(&ga) {
            *ai = (*ai - gi / l_alpha).max(0.0);
        }
        x = reconstruct(&alpha);
        let f = objective.eval(&x);
        if f < best_f {
            best_f = f;
            best_alpha.copy_from_slice(&alpha);
        }
    }
    if !converged {
        alpha = best_alpha;
    }
    Ok(ConeSolveOutcome { weights: alpha, kkt_residual: kkt, inner_iters: iters, converged })
}

/// Exact gauge LP: `min sum(lambda)  s.t.  sum_i lambda_i a_i = x,
/// lambda >= 0`. Returns the value and the decomposition.
pub fn solve_gauge_lp(atoms: &[Atom], x: &[f64]) -> Result<(f64, Vec<f64>)> {
    if atoms.is_empty() {
        return Err(Error::InvalidAtom("gauge LP needs at least one atom".into()));
    }
    let d = atoms[0].ambient_dim();
    if x.len() != d {
        return Err(Error::DimensionMismatch { expected: d, got: x.len() });
    }
    if !linalg::all_finite(x) {
        return Err(Error::InvalidAtom("gauge query has non-finite entries".into()));
    }
    let n = atoms.len();
    let scale = linalg::norm(x);
    if scale == 0.0 {
        return Ok((0.0, vec![0.0; n]));
    }
    let mut a = Array2::<f64>::zeros((d, n));
    for (j, atom) in atoms.iter().enumerate() {
        let col = atom.to_dense();
        for i in 0..d {
            a[[i, j]] = col[i];
        }
    }
    let b: Vec<f64> = x.iter().map(|v| v / scale).collect();
    let sol = simplex::simplex_min(&a, &b, &vec![1.0; n])?;
    let lambda: Vec<f64> = sol.x.iter().map(|l| l * scale).collect();
    Ok((sol.value * scale, lambda))
}

/// Solve `min c^T y  s.t.  A y = b, y >= 0` for the geometry sweeps.
pub fn solve_lp(a: &Array2<f64>, b: &[f64], c: &[f64]) -> Result<SimplexSolution> {
    simplex::simplex_min(a, b, c)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::atoms::{Atom, AtomId};
    use crate::objectives::least_squares;

    fn dense_atoms(vecs: &[Vec<f64>]) -> Vec<Atom> {
        vecs.iter()
            .enumerate()
            .map(|(i, v)| Atom::dense(AtomId(i as u64), v.clone()).unwrap())
            .collect()
    }

    #[test]
    fn nnls_orthonormal_feasible_target() {
        let atoms = dense_atoms(&[vec![1.0, 0.0], vec![0.0, 1.0]]);
        let out = nnls_cone(&atoms, &[2.0, 1.0], None, 1e-12).unwrap();
        assert!((out.weights[0] - 2.0).abs() < 1e-12);
        assert!((out.weights[1] - 1.0).abs() < 1e-12);
        assert!(out.converged);
    }

    #[test]
    fn nnls_clips_at_apex() {
        let atoms = dense_atoms(&[vec![1.0, 0.0]]);
        let out = nnls_cone(&atoms, &[-3.0, 0.0], None, 1e-12).unwrap();
        assert_eq!(out.weights, vec![0.0]);
    }

    #[test]
    fn nnls_matches_sign_pattern_enumeration() {
        // 5 atoms in R^8 against the 2^5 active-set brute force.
        let mut state = 0x243f6a8885a308d3u64;
        let mut next = move || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        };
        let vecs: Vec<Vec<f64>> = (0..5).map(|_| (0..8).map(|_| next()).collect()).collect();
        let b: Vec<f64> = (0..8).map(|_| next()).collect();
        let atoms = dense_atoms(&vecs);

        let residual = |w: &[f64]| -> f64 {
            let mut r = b.clone();
            for (a, &wi) in atoms.iter().zip(w) {
                a.add_scaled_into(-wi, &mut r);
            }
            linalg::norm_sq(&r)
        };

        // Brute force: for each support, solve the equality-constrained LS
        // and keep the best feasible candidate.
        let (g, c) = gram_and_rhs(&atoms, &b);
        let mut best = residual(&vec![0.0; 5]);
        for mask in 1u32..32 {
            let passive: Vec<usize> = (0..5).filter(|i| mask >> i & 1 == 1).collect();
            let z = solve_on_passive(&g, &c, &passive);
            if z.iter().any(|&v| v < 0.0) {
                continue;
            }
            let mut w = vec![0.0; 5];
            for (ii, &i) in passive.iter().enumerate() {
                w[i] = z[ii];
            }
            best = best.min(residual(&w));
        }

        let out = nnls_cone(&atoms, &b, None, 1e-12).unwrap();
        assert!((residual(&out.weights) - best).abs() < 1e-9);
        // KKT conditions hold as stated.
        for i in 0..5 {
            let gi: f64 = (0..5).map(|j| g[[i, j]] * out.weights[j]).sum::<f64>() - c[i];
            assert!(gi >= -1e-9, "dual feasibility violated: {gi}");
            if out.weights[i] > 0.0 {
                assert!(gi.abs() <= 1e-9, "complementarity violated: {gi}");
            }
        }
    }

    #[test]
    fn nnls_warm_start_is_accepted() {
        let atoms = dense_atoms(&[vec![1.0, 0.0], vec![0.0, 1.0]]);
        let warm = vec![2.0, 1.0];
        let out = nnls_cone(&atoms, &[2.0, 1.0], Some(&warm), 1e-12).unwrap();
        assert!((out.weights[0] - 2.0).abs() < 1e-12);
        assert!((out.weights[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn pg_agrees_with_nnls_on_least_squares() {
        let atoms = dense_atoms(&[vec![1.0, 0.2, 0.0], vec![0.3, 1.0, 0.1], vec![0.0, 0.4, 1.0]]);
        let target = vec![0.7, -0.2, 0.5];
        let obj = least_squares(target.clone());
        let nnls = nnls_cone(&atoms, &target, None, 1e-12).unwrap();
        let pg = projected_gradient_cone(&atoms, &obj, None, 1e-12, 200_000).unwrap();
        for (a, b) in nnls.weights.iter().zip(&pg.weights) {
            assert!((a - b).abs() < 1e-8, "{a} vs {b}");
        }
        // And the dispatcher takes the exact route.
        let routed = min_over_cone(&atoms, &obj, None, 1e-12, 10).unwrap();
        assert_eq!(routed.weights, nnls.weights);
    }

    #[test]
    fn pg_fixed_point_returns_immediately() {
        let atoms = dense_atoms(&[vec![1.0, 0.0], vec![0.0, 1.0]]);
        let obj = least_squares(vec![2.0, 1.0]);
        let warm = vec![2.0, 1.0];
        let out = projected_gradient_cone(&atoms, &obj, Some(&warm), 1e-10, 100).unwrap();
        assert!(out.inner_iters <= 1);
        assert_eq!(out.weights, warm);
    }

    #[test]
    fn gauge_lp_examples() {
        let s2 = 1.0 / 2.0f64.sqrt();
        let atoms = dense_atoms(&[vec![1.0, 0.0], vec![0.0, 1.0], vec![s2, s2]]);
        let (value, lambda) = solve_gauge_lp(&atoms, &[1.0, 1.0]).unwrap();
        assert!((value - 2.0f64.sqrt()).abs() < 1e-9, "diagonal atom should win: {value}");
        assert!((lambda[2] - 2.0f64.sqrt()).abs() < 1e-9);

        let (zero, lz) = solve_gauge_lp(&atoms, &[0.0, 0.0]).unwrap();
        assert_eq!(zero, 0.0);
        assert!(lz.iter().all(|&l| l == 0.0));
    }

    #[test]
    fn gauge_lp_extreme_atom_scaling() {
        // x = 1.5 * a for an extreme atom with orthogonal co-atoms.
        let atoms = dense_atoms(&[vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0]]);
        let (value, _) = solve_gauge_lp(&atoms, &[1.5, 0.0, 0.0]).unwrap();
        assert!((value - 1.5).abs() < 1e-9);
    }

    #[test]
    fn gauge_lp_infeasible() {
        let atoms = dense_atoms(&[vec![1.0, 0.0], vec![0.0, 1.0]]);
        assert!(matches!(
            solve_gauge_lp(&atoms, &[-1.0, 0.5]),
            Err(Error::Infeasible)
        ));
    }

    #[test]
    fn gauge_lp_weak_duality_against_feasible_decompositions() {
        let atoms = dense_atoms(&[
            vec![1.0, 0.0],
            vec![0.0, 1.0],
            vec![0.6, 0.8],
            vec![0.8, 0.6],
        ]);
        let mut state = 0xb7e151628aed2a6bu64;
        let mut next = move || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f64 / (1u64 << 53) as f64
        };
        for _ in 0..20 {
            // Build a random feasible decomposition, then check the LP value
            // never exceeds its coefficient sum.
            let lam: Vec<f64> = (0..4).map(|_| next()).collect();
            let mut x = vec![0.0; 2];
            for (a, &l) in atoms.iter().zip(&lam) {
                a.add_scaled_into(l, &mut x);
            }
            let (value, _) = solve_gauge_lp(&atoms, &x).unwrap();
            let sum: f64 = lam.iter().sum();
            assert!(value <= sum + 1e-9, "{value} > {sum}");
        }
    }

    #[test]
    fn gauge_lp_deterministic() {
        let atoms = dense_atoms(&[vec![1.0, 0.1], vec![0.1, 1.0], vec![0.7, 0.7]]);
        let a = solve_gauge_lp(&atoms, &[0.9, 0.8]).unwrap();
        let b = solve_gauge_lp(&atoms, &[0.9, 0.8]).unwrap();
        assert_eq!(a.0.to_bits(), b.0.to_bits());
        assert_eq!(a.1, b.1);
    }
}
