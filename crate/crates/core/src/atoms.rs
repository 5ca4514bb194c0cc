//! Atom sets and their linear minimization oracles.
//!
//! An atom set describes the dictionary `A` that solvers optimize over. Two
//! kinds are supported: a finite list of dense vectors, and the implicit set
//! of unit-norm non-negative rank-one matrices `u v^T` used for matrix
//! factorization. The latter only answers approximate queries (a truncated
//! power method); the former answers exact ones by exhaustive scan.

use std::fmt;
use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};

use serde::{Deserialize, Serialize};

use crate::coneproj;
use crate::error::{Error, Result};
use crate::linalg;

/// Default size caps for the exact gauge computation.
pub const GAUGE_MAX_DIM: usize = 64;
pub const GAUGE_MAX_ATOMS: usize = 256;

/// Stable identifier of an atom. For finite dictionaries this is the row
/// index at construction; dynamically generated rank-one atoms receive fresh
/// ids from their set. Ids are assigned once and never recomputed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct AtomId(pub u64);

impl fmt::Display for AtomId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Payload of an atom: either a dense vector or a rank-one matrix kept as
/// its factor pair. Rank-one payloads are never materialized as full
/// matrices; inner products with a gradient `G` use `<G, u v^T> = u^T G v`.
#[derive(Debug, Clone, PartialEq)]
pub enum AtomPayload {
    Dense(Vec<f64>),
    RankOne { u: Vec<f64>, v: Vec<f64> },
}

#[derive(Debug, Clone)]
pub struct Atom {
    id: AtomId,
    payload: AtomPayload,
}

impl PartialEq for Atom {
    fn eq(&self, other: &Self) -> bool {
        self.id == other.id
    }
}
impl Eq for Atom {}

impl Atom {
    pub fn dense(id: AtomId, values: Vec<f64>) -> Result<Self> {
        if !linalg::all_finite(&values) {
            return Err(Error::InvalidAtom(format!("atom {id} has non-finite entries")));
        }
        Ok(Atom { id, payload: AtomPayload::Dense(values) })
    }

    pub fn rank_one(id: AtomId, u: Vec<f64>, v: Vec<f64>) -> Result<Self> {
        if !linalg::all_finite(&u) || !linalg::all_finite(&v) {
            return Err(Error::InvalidAtom(format!("atom {id} has non-finite factors")));
        }
        if u.iter().chain(v.iter()).any(|&x| x < 0.0) {
            return Err(Error::InvalidAtom(format!("atom {id} has negative factor entries")));
        }
        Ok(Atom { id, payload: AtomPayload::RankOne { u, v } })
    }

    pub fn id(&self) -> AtomId {
        self.id
    }

    pub fn payload(&self) -> &AtomPayload {
        &self.payload
    }

    /// Dimension of the ambient (flattened) space this atom lives in.
    pub fn ambient_dim(&self) -> usize {
        match &self.payload {
            AtomPayload::Dense(v) => v.len(),
            AtomPayload::RankOne { u, v } => u.len() * v.len(),
        }
    }

    /// `<q, a>` against a flat point; rank-one matrices are laid out
    /// row-major, so the inner product is `u^T Q v` without materializing.
    pub fn dot_point(&self, q: &[f64]) -> f64 {
        match &self.payload {
            AtomPayload::Dense(a) => linalg::dot(a, q),
            AtomPayload::RankOne { u, v } => {
                let n = v.len();
                let mut acc = 0.0;
                for (i, &ui) in u.iter().enumerate() {
                    if ui == 0.0 {
                        continue;
                    }
                    acc += ui * linalg::dot(&q[i * n..(i + 1) * n], v);
                }
                acc
            }
        }
    }

    /// `<a, b>` between atoms; rank-one pairs reduce to `(u.u')(v.v')`.
    pub fn dot_atom(&self, other: &Atom) -> f64 {
        match (&self.payload, &other.payload) {
            (AtomPayload::Dense(a), AtomPayload::Dense(b)) => linalg::dot(a, b),
            (AtomPayload::RankOne { u: u1, v: v1 }, AtomPayload::RankOne { u: u2, v: v2 }) => {
                linalg::dot(u1, u2) * linalg::dot(v1, v2)
            }
            (AtomPayload::Dense(a), AtomPayload::RankOne { .. }) => other.dot_point(a),
            (AtomPayload::RankOne { .. }, AtomPayload::Dense(b)) => self.dot_point(b),
        }
    }

    pub fn norm_sq(&self) -> f64 {
        match &self.payload {
            AtomPayload::Dense(a) => linalg::norm_sq(a),
            AtomPayload::RankOne { u, v } => linalg::norm_sq(u) * linalg::norm_sq(v),
        }
    }

    /// out += c * a
    pub fn add_scaled_into(&self, c: f64, out: &mut [f64]) {
        match &self.payload {
            AtomPayload::Dense(a) => linalg::axpy(c, a, out),
            AtomPayload::RankOne { u, v } => {
                let n = v.len();
                for (i, &ui) in u.iter().enumerate() {
                    if ui == 0.0 {
                        continue;
                    }
                    linalg::axpy(c * ui, v, &mut out[i * n..(i + 1) * n]);
                }
            }
        }
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.ambient_dim()];
        self.add_scaled_into(1.0, &mut out);
        out
    }

    pub fn is_origin(&self) -> bool {
        self.norm_sq() == 0.0
    }
}

/// Answer of a linear minimization query.
#[derive(Debug, Clone)]
pub struct LmoAnswer {
    pub atom: Atom,
    /// `<query, atom>` for the returned atom.
    pub score: f64,
    /// Quality the answer is certified for: 1 for exact answers, the
    /// configured value for approximate ones.
    pub delta: f64,
}

#[derive(Debug, Clone)]
pub enum AtomSetKind {
    FiniteDictionary(Vec<Atom>),
    RankOneNonNeg { rows: usize, cols: usize },
}

/// An immutable atom set. Safe to share across threads; oracle calls are
/// pure apart from the id counter that brands dynamically generated
/// rank-one atoms.
#[derive(Debug)]
pub struct AtomSet {
    kind: AtomSetKind,
    contains_origin: bool,
    next_dynamic_id: AtomicU64,
}

impl Clone for AtomSet {
    fn clone(&self) -> Self {
        AtomSet {
            kind: self.kind.clone(),
            contains_origin: self.contains_origin,
            next_dynamic_id: AtomicU64::new(self.next_dynamic_id.load(Ordering::Relaxed)),
        }
    }
}

impl AtomSet {
    /// Finite dictionary from dense vectors; ids are assigned in order.
    /// `contains_origin` is detected from the data.
    pub fn finite(vectors: Vec<Vec<f64>>) -> Result<Self> {
        if vectors.is_empty() {
            return Err(Error::InvalidAtom("dictionary must be non-empty".into()));
        }
        let dim = vectors[0].len();
        let mut atoms = Vec::with_capacity(vectors.len());
        let mut contains_origin = false;
        for (i, v) in vectors.into_iter().enumerate() {
            if v.len() != dim {
                return Err(Error::DimensionMismatch { expected: dim, got: v.len() });
            }
            if v.iter().all(|&x| x == 0.0) {
                contains_origin = true;
            }
            atoms.push(Atom::dense(AtomId(i as u64), v)?);
        }
        Ok(AtomSet {
            kind: AtomSetKind::FiniteDictionary(atoms),
            contains_origin,
            next_dynamic_id: AtomicU64::new(0),
        })
    }

    /// Finite dictionary with the zero atom appended when absent.
    pub fn finite_with_origin(mut vectors: Vec<Vec<f64>>) -> Result<Self> {
        if vectors.is_empty() {
            return Err(Error::InvalidAtom("dictionary must be non-empty".into()));
        }
        let dim = vectors[0].len();
        if !vectors.iter().any(|v| v.iter().all(|&x| x == 0.0)) {
            vectors.push(vec![0.0; dim]);
        }
        Self::finite(vectors)
    }

    /// The set of rank-one matrices `u v^T` with unit-norm non-negative
    /// factors, plus the origin.
    pub fn rank_one_non_neg(rows: usize, cols: usize) -> Self {
        AtomSet {
            kind: AtomSetKind::RankOneNonNeg { rows, cols },
            contains_origin: true,
            next_dynamic_id: AtomicU64::new(0),
        }
    }

    /// Load a finite dictionary from CSV, one atom per row. A non-numeric
    /// first row is treated as a header. Ids are data row indices.
    pub fn finite_from_csv<P: AsRef<Path>>(path: P) -> Result<Self> {
        let text = std::fs::read_to_string(path.as_ref())?;
        let mut rows: Vec<Vec<f64>> = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let parsed: std::result::Result<Vec<f64>, _> =
                line.split(',').map(|tok| tok.trim().parse::<f64>()).collect();
            match parsed {
                Ok(vals) => rows.push(vals),
                Err(e) => {
                    if lineno == 0 && rows.is_empty() {
                        continue; // header
                    }
                    return Err(Error::Parse {
                        context: format!("atom CSV line {}", lineno + 1),
                        message: e.to_string(),
                    });
                }
            }
        }
        Self::finite(rows)
    }

    /// A copy of this dictionary with every atom multiplied by `tau`.
    pub fn scaled(&self, tau: f64) -> Result<Self> {
        match &self.kind {
            AtomSetKind::FiniteDictionary(atoms) => {
                let vectors = atoms
                    .iter()
                    .map(|a| {
                        let mut v = a.to_dense();
                        linalg::scale(&mut v, tau);
                        v
                    })
                    .collect();
                Self::finite(vectors)
            }
            AtomSetKind::RankOneNonNeg { .. } => Err(Error::ExactLmoUnavailable),
        }
    }

    pub fn kind(&self) -> &AtomSetKind {
        &self.kind
    }

    pub fn contains_origin(&self) -> bool {
        self.contains_origin
    }

    pub fn ambient_dim(&self) -> usize {
        match &self.kind {
            AtomSetKind::FiniteDictionary(atoms) => atoms[0].ambient_dim(),
            AtomSetKind::RankOneNonNeg { rows, cols } => rows * cols,
        }
    }

    pub fn atoms(&self) -> Option<&[Atom]> {
        match &self.kind {
            AtomSetKind::FiniteDictionary(atoms) => Some(atoms),
            AtomSetKind::RankOneNonNeg { .. } => None,
        }
    }

    pub fn len(&self) -> Option<usize> {
        self.atoms().map(|a| a.len())
    }

    pub fn describe(&self) -> String {
        match &self.kind {
            AtomSetKind::FiniteDictionary(atoms) => {
                format!("finite dictionary, {} atoms in R^{}", atoms.len(), self.ambient_dim())
            }
            AtomSetKind::RankOneNonNeg { rows, cols } => {
                format!("non-negative rank-one matrices, {rows}x{cols}")
            }
        }
    }

    fn fresh_dynamic_id(&self) -> AtomId {
        // High bit distinguishes minted ids from dictionary row indices.
        let n = self.next_dynamic_id.fetch_add(1, Ordering::Relaxed);
        AtomId((1 << 63) | n)
    }
}

/// Exact linear minimization: the atom minimizing `<query, z>` over the
/// dictionary, ties broken by smallest atom id.
pub fn lmo_exact(query: &[f64], set: &AtomSet) -> Result<LmoAnswer> {
    let atoms = match set.kind() {
        AtomSetKind::FiniteDictionary(atoms) => atoms,
        AtomSetKind::RankOneNonNeg { .. } => return Err(Error::ExactLmoUnavailable),
    };
    if query.len() != set.ambient_dim() {
        return Err(Error::DimensionMismatch { expected: set.ambient_dim(), got: query.len() });
    }
    let mut best: Option<(f64, &Atom)> = None;
    for atom in atoms {
        let score = atom.dot_point(query);
        match best {
            Some((s, _)) if score >= s => {}
            _ => best = Some((score, atom)),
        }
    }
    let (score, atom) = best.expect("dictionary is non-empty");
    Ok(LmoAnswer { atom: atom.clone(), score, delta: 1.0 })
}

/// Approximate linear minimization. Finite dictionaries delegate to the
/// exact oracle (reported delta 1). Rank-one sets run a truncated power
/// method on `-query`, alternating `u <- max(-Q v, 0)/||.||` and
/// `v <- max(-Q^T u, 0)/||.||` from a deterministic uniform start, and
/// return the atom `u v^T`. The reported delta is the configured value; the
/// method carries no provable certificate, so callers accept the answer
/// only when its score is negative.
pub fn lmo_approx(query: &[f64], set: &AtomSet, delta: f64, iters: usize) -> Result<LmoAnswer> {
    match set.kind() {
        AtomSetKind::FiniteDictionary(_) => lmo_exact(query, set),
        AtomSetKind::RankOneNonNeg { rows, cols } => {
            let (m, n) = (*rows, *cols);
            if query.len() != m * n {
                return Err(Error::DimensionMismatch { expected: m * n, got: query.len() });
            }
            assert!(iters >= 1, "power iteration needs at least one round");
            let mut u = vec![0.0f64; m];
            let mut v = vec![1.0 / (n as f64).sqrt(); n];
            for _ in 0..iters {
                // u <- max(-Q v, 0), normalized
                for i in 0..m {
                    let qi = &query[i * n..(i + 1) * n];
                    u[i] = (-linalg::dot(qi, &v)).max(0.0);
                }
                let nu = linalg::norm(&u);
                if nu == 0.0 {
                    return Err(Error::DegenerateQuery);
                }
                linalg::scale(&mut u, 1.0 / nu);
                // v <- max(-Q^T u, 0), normalized
                for j in 0..n {
                    let mut acc = 0.0;
                    for i in 0..m {
                        acc += query[i * n + j] * u[i];
                    }
                    v[j] = (-acc).max(0.0);
                }
                let nv = linalg::norm(&v);
                if nv == 0.0 {
                    return Err(Error::DegenerateQuery);
                }
                linalg::scale(&mut v, 1.0 / nv);
            }
            let atom = Atom::rank_one(set.fresh_dynamic_id(), u, v)?;
            let score = atom.dot_point(query);
            Ok(LmoAnswer { atom, score, delta: delta.clamp(0.0, 1.0) })
        }
    }
}

/// Atomic norm (gauge of `conv(A)` for sets containing the origin): the
/// minimum coefficient sum over conic decompositions of `x`, solved exactly
/// by the dense gauge LP.
pub fn atomic_norm(x: &[f64], set: &AtomSet) -> Result<f64> {
    let atoms = set.atoms().ok_or(Error::ExactLmoUnavailable)?;
    if x.len() != set.ambient_dim() {
        return Err(Error::DimensionMismatch { expected: set.ambient_dim(), got: x.len() });
    }
    if x.len() > GAUGE_MAX_DIM {
        return Err(Error::SetTooLarge { limit: GAUGE_MAX_DIM, got: x.len() });
    }
    if atoms.len() > GAUGE_MAX_ATOMS {
        return Err(Error::SetTooLarge { limit: GAUGE_MAX_ATOMS, got: atoms.len() });
    }
    let (value, _lambda) = coneproj::solve_gauge_lp(atoms, x)?;
    Ok(value)
}

/// Largest atom norm. Analytically 1 for the rank-one set (unit factors).
pub fn radius(set: &AtomSet) -> Result<f64> {
    match set.kind() {
        AtomSetKind::FiniteDictionary(atoms) => {
            Ok(atoms.iter().map(|a| a.norm_sq().sqrt()).fold(0.0, f64::max))
        }
        AtomSetKind::RankOneNonNeg { .. } => Ok(1.0),
    }
}

/// Largest pairwise distance, by exhaustive scan.
pub fn diameter(set: &AtomSet) -> Result<f64> {
    match set.kind() {
        AtomSetKind::FiniteDictionary(atoms) => {
            let mut best = 0.0f64;
            for (i, a) in atoms.iter().enumerate() {
                for b in &atoms[i + 1..] {
                    let d2 = a.norm_sq() + b.norm_sq() - 2.0 * a.dot_atom(b);
                    best = best.max(d2.max(0.0));
                }
            }
            Ok(best.sqrt())
        }
        AtomSetKind::RankOneNonNeg { .. } => {
            Err(Error::SetTooLarge { limit: 0, got: usize::MAX })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn e(i: usize, d: usize) -> Vec<f64> {
        let mut v = vec![0.0; d];
        v[i] = 1.0;
        v
    }

    fn basis_with_origin() -> AtomSet {
        AtomSet::finite(vec![vec![0.0, 0.0], e(0, 2), e(1, 2)]).unwrap()
    }

    #[test]
    fn lmo_exact_picks_coordinate_argmin() {
        let set = basis_with_origin();
        let ans = lmo_exact(&[-1.0, 0.0], &set).unwrap();
        assert_eq!(ans.atom.id(), AtomId(1));
        assert_eq!(ans.score, -1.0);
        assert_eq!(ans.delta, 1.0);
    }

    #[test]
    fn lmo_exact_returns_origin_when_all_scores_positive() {
        let set = basis_with_origin();
        let ans = lmo_exact(&[1.0, 1.0], &set).unwrap();
        assert_eq!(ans.atom.id(), AtomId(0));
        assert_eq!(ans.score, 0.0);
    }

    #[test]
    fn lmo_exact_matches_brute_force_scan() {
        // 7 pseudo-random unit vectors in R^5 against a brute-force argmin.
        let mut state = 0x9e3779b97f4a7c15u64;
        let mut next = move || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        };
        let mut vectors = Vec::new();
        for _ in 0..7 {
            let mut v: Vec<f64> = (0..5).map(|_| next()).collect();
            let n = linalg::norm(&v);
            linalg::scale(&mut v, 1.0 / n);
            vectors.push(v);
        }
        let query: Vec<f64> = (0..5).map(|_| next()).collect();
        let set = AtomSet::finite(vectors.clone()).unwrap();
        let ans = lmo_exact(&query, &set).unwrap();

        let mut best = (f64::INFINITY, usize::MAX);
        for (i, v) in vectors.iter().enumerate() {
            let s = linalg::dot(v, &query);
            if s < best.0 {
                best = (s, i);
            }
        }
        assert_eq!(ans.atom.id(), AtomId(best.1 as u64));
        assert!((ans.score - best.0).abs() < 1e-15);
    }

    #[test]
    fn lmo_exact_rejects_dimension_mismatch() {
        let set = basis_with_origin();
        assert!(matches!(
            lmo_exact(&[1.0], &set),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn lmo_approx_rank_one_fixed_point() {
        // query = -y x^T for unit non-negative x, y has the atom (y, x) as a
        // fixed point with score -1.
        let y = vec![0.6, 0.8];
        let x = vec![0.8, 0.0, 0.6];
        let mut q = vec![0.0; 6];
        for i in 0..2 {
            for j in 0..3 {
                q[i * 3 + j] = -y[i] * x[j];
            }
        }
        let set = AtomSet::rank_one_non_neg(2, 3);
        let ans = lmo_approx(&q, &set, 1.0, 50).unwrap();
        assert!((ans.score + 1.0).abs() < 1e-12);
        match ans.atom.payload() {
            AtomPayload::RankOne { u, v } => {
                for (a, b) in u.iter().zip(&y) {
                    assert!((a - b).abs() < 1e-10);
                }
                for (a, b) in v.iter().zip(&x) {
                    assert!((a - b).abs() < 1e-10);
                }
            }
            _ => panic!("expected rank-one payload"),
        }
    }

    #[test]
    fn lmo_approx_zero_query_is_degenerate() {
        let set = AtomSet::rank_one_non_neg(2, 2);
        assert!(matches!(
            lmo_approx(&[0.0; 4], &set, 1.0, 10),
            Err(Error::DegenerateQuery)
        ));
    }

    #[test]
    fn lmo_approx_positive_query_is_degenerate() {
        // A strictly positive query admits no improving rank-one atom; the
        // clamped power iteration collapses to zero.
        let set = AtomSet::rank_one_non_neg(2, 2);
        assert!(matches!(
            lmo_approx(&[1.0, 2.0, 0.5, 3.0], &set, 1.0, 10),
            Err(Error::DegenerateQuery)
        ));
    }

    #[test]
    fn lmo_approx_delegates_on_finite_dictionary() {
        let set = basis_with_origin();
        let q = [-0.3, -0.9];
        let exact = lmo_exact(&q, &set).unwrap();
        let approx = lmo_approx(&q, &set, 0.5, 3).unwrap();
        assert_eq!(exact.atom.id(), approx.atom.id());
        assert_eq!(exact.score, approx.score);
        assert_eq!(approx.delta, 1.0);
    }

    #[test]
    fn radius_and_diameter_examples() {
        let set = basis_with_origin();
        assert_eq!(radius(&set).unwrap(), 1.0);
        assert!((diameter(&set).unwrap() - 2.0f64.sqrt()).abs() < 1e-15);

        let stretched = AtomSet::finite(vec![vec![0.0], vec![3.0]]).unwrap();
        assert_eq!(radius(&stretched).unwrap(), 3.0);
        assert_eq!(diameter(&stretched).unwrap(), 3.0);
    }

    #[test]
    fn atomic_norm_examples() {
        let set = basis_with_origin();
        assert_eq!(atomic_norm(&[0.0, 0.0], &set).unwrap(), 0.0);
        assert!((atomic_norm(&[2.0, 0.0], &set).unwrap() - 2.0).abs() < 1e-9);
        assert!((atomic_norm(&[1.0, 1.0], &set).unwrap() - 2.0).abs() < 1e-9);
    }

    #[test]
    fn atomic_norm_infeasible_outside_cone() {
        let set = basis_with_origin();
        assert!(matches!(
            atomic_norm(&[-1.0, 0.0], &set),
            Err(Error::Infeasible)
        ));
    }

    #[test]
    fn csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("atoms.csv");
        std::fs::write(&path, "a,b\n0,0\n1,0\n0.5,0.5\n").unwrap();
        let set = AtomSet::finite_from_csv(&path).unwrap();
        assert_eq!(set.len(), Some(3));
        assert!(set.contains_origin());
        let atoms = set.atoms().unwrap();
        assert_eq!(atoms[2].to_dense(), vec![0.5, 0.5]);
    }
}
