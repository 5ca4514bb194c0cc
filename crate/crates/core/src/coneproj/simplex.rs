//! Dense two-phase tableau simplex with Bland's rule.
//!
//! Sized for gauge computations over desk-scale dictionaries (tens of rows,
//! a few hundred columns). Bland's rule keeps the pivoting cycle-proof on
//! degenerate instances and makes every run deterministic.

use ndarray::Array2;

use crate::error::{Error, Result};

const PIVOT_EPS: f64 = 1e-9;
const REDUCED_COST_EPS: f64 = 1e-10;
const FEAS_TOL: f64 = 1e-8;
const MAX_PIVOTS: usize = 20_000;

pub struct SimplexSolution {
    pub x: Vec<f64>,
    pub value: f64,
}

/// Solve `min c^T x  s.t.  A x = b, x >= 0`.
pub fn simplex_min(a: &Array2<f64>, b: &[f64], c: &[f64]) -> Result<SimplexSolution> {
    let m = a.nrows();
    let n = a.ncols();
    assert_eq!(b.len(), m);
    assert_eq!(c.len(), n);

    // Tableau columns: n structural, m artificial, 1 rhs.
    let cols = n + m + 1;
    let mut t = vec![0.0f64; m * cols];
    for i in 0..m {
        let sign = if b[i] < 0.0 { -1.0 } else { 1.0 };
        for j in 0..n {
            t[i * cols + j] = sign * a[[i, j]];
        }
        t[i * cols + n + i] = 1.0;
        t[i * cols + n + m] = sign * b[i];
    }
    let mut basis: Vec<usize> = (n..n + m).collect();

    let phase1_cost = |j: usize| if j >= n { 1.0 } else { 0.0 };
    let phase2_cost = |j: usize| if j < n { c[j] } else { 0.0 };

    run_phase(&mut t, &mut basis, m, n, cols, &phase1_cost, true)?;
    let p1 = objective(&t, &basis, m, cols, &phase1_cost);
    if p1 > FEAS_TOL {
        return Err(Error::Infeasible);
    }
    drive_out_artificials(&mut t, &mut basis, m, n, cols);
    run_phase(&mut t, &mut basis, m, n, cols, &phase2_cost, false)?;

    let mut x = vec![0.0f64; n];
    for i in 0..m {
        if basis[i] < n {
            x[basis[i]] = t[i * cols + n + m];
        }
    }
    let value = x.iter().zip(c).map(|(xi, ci)| xi * ci).sum();
    Ok(SimplexSolution { x, value })
}

fn objective(
    t: &[f64],
    basis: &[usize],
    m: usize,
    cols: usize,
    cost: &dyn Fn(usize) -> f64,
) -> f64 {
    (0..m).map(|i| cost(basis[i]) * t[i * cols + cols - 1]).sum()
}

fn run_phase(
    t: &mut [f64],
    basis: &mut [usize],
    m: usize,
    n: usize,
    cols: usize,
    cost: &dyn Fn(usize) -> f64,
    allow_artificial: bool,
) -> Result<()> {
    let n_enterable = if allow_artificial { n + m } else { n };
    for _pivot in 0..MAX_PIVOTS {
        // Reduced costs; Bland: enter the smallest improving index.
        let mut entering = None;
        for j in 0..n_enterable {
            if basis.contains(&j) {
                continue;
            }
            let mut rc = cost(j);
            for i in 0..m {
                rc -= cost(basis[i]) * t[i * cols + j];
            }
            if rc < -REDUCED_COST_EPS {
                entering = Some(j);
                break;
            }
        }
        let Some(j) = entering else { return Ok(()) };

        // Ratio test; ties resolved by smallest basic variable (Bland).
        let mut leave: Option<(usize, f64)> = None;
        for i in 0..m {
            let aij = t[i * cols + j];
            if aij > PIVOT_EPS {
                let ratio = t[i * cols + cols - 1] / aij;
                match leave {
                    None => leave = Some((i, ratio)),
                    Some((li, lr)) => {
                        if ratio < lr - 1e-12
                            || (ratio <= lr + 1e-12 && basis[i] < basis[li])
                        {
                            leave = Some((i, ratio));
                        }
                    }
                }
            }
        }
        let Some((r, _)) = leave else {
            // A descent column with no positive entry: unbounded. Cannot
            // happen for the gauge and strict-positivity LPs (objectives are
            // bounded below), so surface it as a numerical failure.
            return Err(Error::SingularCorrection);
        };
        pivot(t, m, cols, r, j);
        basis[r] = j;
    }
    Err(Error::MaxIterationsExceeded(MAX_PIVOTS))
}

fn pivot(t: &mut [f64], m: usize, cols: usize, r: usize, j: usize) {
    let p = t[r * cols + j];
    for v in t[r * cols..(r + 1) * cols].iter_mut() {
        *v /= p;
    }
    for i in 0..m {
        if i == r {
            continue;
        }
        let f = t[i * cols + j];
        if f == 0.0 {
            continue;
        }
        for k in 0..cols {
            t[i * cols + k] -= f * t[r * cols + k];
        }
    }
}

fn drive_out_artificials(t: &mut [f64], basis: &mut [usize], m: usize, n: usize, cols: usize) {
    for i in 0..m {
        if basis[i] < n {
            continue;
        }
        // Basic artificial at level ~0; pivot any structural column in, or
        // leave it (redundant row) where phase 2 never re-enters artificials.
        if let Some(j) = (0..n)
            .find(|&j| !basis.contains(&j) && t[i * cols + j].abs() > PIVOT_EPS)
        {
            pivot(t, m, cols, i, j);
            basis[i] = j;
        }
    }
}
