//! Small dense kernels shared across the crate.
//!
//! Everything here operates on `&[f64]` slices or small `ndarray` matrices.
//! Problems are desk scale (dimensions in the tens, active sets in the
//! hundreds at most), so plain loops and a Jacobi eigensolver are enough.

use ndarray::Array2;

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm_sq(a: &[f64]) -> f64 {
    dot(a, a)
}

pub fn norm(a: &[f64]) -> f64 {
    norm_sq(a).sqrt()
}

/// out += c * a
pub fn axpy(c: f64, a: &[f64], out: &mut [f64]) {
    debug_assert_eq!(a.len(), out.len());
    for (o, x) in out.iter_mut().zip(a) {
        *o += c * x;
    }
}

pub fn scale(a: &mut [f64], c: f64) {
    for x in a.iter_mut() {
        *x *= c;
    }
}

pub fn all_finite(a: &[f64]) -> bool {
    a.iter().all(|x| x.is_finite())
}

/// Cholesky solve of an SPD system `g w = rhs`. Returns `None` when a pivot
/// falls below `rel_tol * max_diag`, i.e. the matrix is not safely positive
/// definite.
pub fn solve_spd(g: &Array2<f64>, rhs: &[f64], rel_tol: f64) -> Option<Vec<f64>> {
    let n = rhs.len();
    debug_assert_eq!(g.nrows(), n);
    debug_assert_eq!(g.ncols(), n);
    let max_diag = (0..n).map(|i| g[[i, i]].abs()).fold(0.0f64, f64::max);
    let floor = rel_tol * max_diag.max(1e-300);
    let mut l = vec![0.0f64; n * n];
    for j in 0..n {
        let mut d = g[[j, j]];
        for k in 0..j {
            d -= l[j * n + k] * l[j * n + k];
        }
        if d <= floor {
            return None;
        }
        let dj = d.sqrt();
        l[j * n + j] = dj;
        for i in (j + 1)..n {
            let mut v = g[[i, j]];
            for k in 0..j {
                v -= l[i * n + k] * l[j * n + k];
            }
            l[i * n + j] = v / dj;
        }
    }
    // forward then backward substitution
    let mut y = rhs.to_vec();
    for i in 0..n {
        for k in 0..i {
            y[i] -= l[i * n + k] * y[k];
        }
        y[i] /= l[i * n + i];
    }
    for i in (0..n).rev() {
        for k in (i + 1)..n {
            y[i] -= l[k * n + i] * y[k];
        }
        y[i] /= l[i * n + i];
    }
    Some(y)
}

/// Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.
/// Returns (eigenvalues, eigenvectors as columns). Deterministic.
pub fn sym_eigen(a: &Array2<f64>) -> (Vec<f64>, Array2<f64>) {
    let n = a.nrows();
    debug_assert_eq!(a.ncols(), n);
    let mut m = a.clone();
    let mut v = Array2::<f64>::eye(n);
    if n <= 1 {
        return ((0..n).map(|i| m[[i, i]]).collect(), v);
    }
    for _sweep in 0..100 {
        let mut off = 0.0;
        for p in 0..n {
            for q in (p + 1)..n {
                off += m[[p, q]] * m[[p, q]];
            }
        }
        if off <= 1e-30 * (1.0 + m.iter().map(|x| x * x).sum::<f64>()) {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[[p, q]];
                if apq.abs() < 1e-300 {
                    continue;
                }
                let app = m[[p, p]];
                let aqq = m[[q, q]];
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[[k, p]];
                    let mkq = m[[k, q]];
                    m[[k, p]] = c * mkp - s * mkq;
                    m[[k, q]] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[[p, k]];
                    let mqk = m[[q, k]];
                    m[[p, k]] = c * mpk - s * mqk;
                    m[[q, k]] = s * mpk + c * mqk;
                }
                for k in 0..n {
                    let vkp = v[[k, p]];
                    let vkq = v[[k, q]];
                    v[[k, p]] = c * vkp - s * vkq;
                    v[[k, q]] = s * vkp + c * vkq;
                }
            }
        }
    }
    ((0..n).map(|i| m[[i, i]]).collect(), v)
}

/// Minimum-norm solution of the symmetric positive semidefinite system
/// `g w = rhs` via eigenvalue thresholding. Used where the Gram matrix of an
/// active set may be rank deficient; any least-squares solution reconstructs
/// the same projected point, the minimum-norm one keeps the weights bounded.
pub fn solve_psd_min_norm(g: &Array2<f64>, rhs: &[f64]) -> Vec<f64> {
    let n = rhs.len();
    let (vals, vecs) = sym_eigen(g);
    let vmax = vals.iter().cloned().fold(0.0f64, f64::max);
    let cutoff = vmax * 1e-12;
    let mut w = vec![0.0f64; n];
    for (j, &lam) in vals.iter().enumerate() {
        if lam > cutoff {
            let col: Vec<f64> = (0..n).map(|i| vecs[[i, j]]).collect();
            let coef = dot(&col, rhs) / lam;
            axpy(coef, &col, &mut w);
        }
    }
    w
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn cholesky_solves_spd_system() {
        let g = array![[4.0, 1.0], [1.0, 3.0]];
        let w = solve_spd(&g, &[1.0, 2.0], 1e-13).unwrap();
        assert!((4.0 * w[0] + w[1] - 1.0).abs() < 1e-12);
        assert!((w[0] + 3.0 * w[1] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn cholesky_rejects_singular() {
        let g = array![[1.0, 1.0], [1.0, 1.0]];
        assert!(solve_spd(&g, &[1.0, 1.0], 1e-13).is_none());
    }

    #[test]
    fn min_norm_solve_handles_rank_deficiency() {
        // g = a a^T with a = (1, 1): solutions of g w = (2, 2) form a line;
        // the minimum-norm one is (1, 1).
        let g = array![[1.0, 1.0], [1.0, 1.0]];
        let w = solve_psd_min_norm(&g, &[2.0, 2.0]);
        assert!((w[0] - 1.0).abs() < 1e-10);
        assert!((w[1] - 1.0).abs() < 1e-10);
    }

    #[test]
    fn jacobi_matches_hand_eigenvalues() {
        let g = array![[2.0, 1.0], [1.0, 2.0]];
        let (mut vals, _) = sym_eigen(&g);
        vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert!((vals[0] - 1.0).abs() < 1e-12);
        assert!((vals[1] - 3.0).abs() < 1e-12);
    }
}
