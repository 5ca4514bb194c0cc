//! Geometric constants of the atom set: directional width, pyramidal
//! directional width, cone width, and minimal directional width.
//!
//! The cone width is computed exactly for two-dimensional finite sets by
//! enumerating the generating faces of `cone(A)` (the convex-hull cap plus
//! the boundary ray segments), evaluating the pyramidal directional width
//! at a finite witness set (face atoms and pairwise midpoints) over a fine
//! angular grid with golden-section refinement. Higher dimensions fall back
//! to certified sampling, clearly labeled, and are never used in exact
//! checks.
//!
//! Pyramidal widths are evaluated through a sorted-prefix argument: for the
//! subsets admitting `x` as a proper convex combination, the best achievable
//! worst-atom score along `r` is the score at which `x` first enters the
//! convex hull of the top-scoring atoms. The standalone `pdir_width`
//! operation instead enumerates subsets explicitly and decides proper
//! membership by a strict-positivity LP, so the two routes check each other.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::atoms::{AtomId, AtomSet};
use crate::coneproj;
use crate::error::{Error, Result};
use crate::linalg;

const CONE_WIDTH_MAX_ATOMS: usize = 32;
const PDIRW_MAX_ATOMS: usize = 12;
const ANGLE_GRID: usize = 4096;
const GOLDEN_TOL: f64 = 1e-12;
/// Threshold on the strict-positivity LP deciding proper membership.
const PROPER_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum WidthKind {
    DirW,
    PdirW,
    ConeWidth,
    Mdw,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum WidthMethod {
    Exact2D,
    Sampled { n_samples: usize },
}

/// The minimizing face, reference point and direction behind a width value.
#[derive(Debug, Clone, Serialize)]
pub struct WidthCertificate {
    pub face_atom_ids: Vec<AtomId>,
    pub reference_point: Vec<f64>,
    pub direction: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct WidthReport {
    pub value: f64,
    pub kind: WidthKind,
    pub certificate: Option<WidthCertificate>,
    pub method: WidthMethod,
}

impl WidthReport {
    /// Re-evaluate the certificate against the set; exact 2D reports
    /// reproduce `value` to 1e-12.
    pub fn reevaluate(&self, set: &AtomSet) -> Result<f64> {
        let cert = self.certificate.as_ref().ok_or(Error::MissingReferenceOptimum)?;
        let points = face_points(set, &cert.face_atom_ids)?;
        let x = [cert.reference_point[0], cert.reference_point[1]];
        let r = [cert.direction[0], cert.direction[1]];
        prefix_eval(&points, r, x).ok_or(Error::NotInHull)
    }
}

/// A one-dimensional generating face of a 2D cone: the atoms on a boundary
/// ray together with the outward supporting normal.
#[derive(Debug, Clone, Serialize)]
pub struct Face2D {
    pub atom_ids: Vec<AtomId>,
    pub normal: [f64; 2],
}

impl Face2D {
    /// Build and validate: face atoms must lie on the supporting line and
    /// all other atoms on its non-positive side (tolerance 1e-12 relative
    /// to the set scale).
    pub fn new(set: &AtomSet, atom_ids: Vec<AtomId>, normal: [f64; 2]) -> Result<Self> {
        let pts = points2d(set)?;
        let scale = pts.iter().map(|(_, p)| p[0].hypot(p[1])).fold(1.0f64, f64::max);
        let tol = 1e-12 * scale;
        for (id, p) in &pts {
            let h = normal[0] * p[0] + normal[1] * p[1];
            if atom_ids.contains(id) {
                if h.abs() > tol {
                    return Err(Error::InvalidAtom(format!("atom {id} is off the supporting line")));
                }
            } else if h > tol {
                return Err(Error::InvalidAtom(format!("atom {id} is on the positive side")));
            }
        }
        Ok(Face2D { atom_ids, normal })
    }
}

/// Directional width `max_{s,v in A} <r/||r||, s - v>` by exhaustive scan.
pub fn dir_width(set: &AtomSet, r: &[f64]) -> Result<f64> {
    let atoms = set.atoms().ok_or(Error::ExactLmoUnavailable)?;
    let rn = linalg::norm(r);
    if rn == 0.0 {
        return Err(Error::ZeroDirection);
    }
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for a in atoms {
        let s = a.dot_point(r) / rn;
        lo = lo.min(s);
        hi = hi.max(s);
    }
    Ok(hi - lo)
}

/// Pyramidal directional width by explicit subset enumeration: the minimum
/// over subsets `S` admitting `x` as a proper convex combination of
/// `dirW(S + {s(A,r)}, r)`. Proper membership is decided by a strict
/// positivity LP. Capped at 12 atoms.
pub fn pdir_width(set: &AtomSet, r: &[f64], x: &[f64]) -> Result<f64> {
    let atoms = set.atoms().ok_or(Error::ExactLmoUnavailable)?;
    let n = atoms.len();
    if n > PDIRW_MAX_ATOMS {
        return Err(Error::SetTooLarge { limit: PDIRW_MAX_ATOMS, got: n });
    }
    let rn = linalg::norm(r);
    if rn == 0.0 {
        return Err(Error::ZeroDirection);
    }
    let scores: Vec<f64> = atoms.iter().map(|a| a.dot_point(r) / rn).collect();
    // s(A, r): the best-aligned atom, ties by smallest id.
    let mut s_best = 0usize;
    for i in 1..n {
        if scores[i] > scores[s_best] {
            s_best = i;
        }
    }

    let mut best: Option<f64> = None;
    for mask in 1u64..(1 << n) {
        let members: Vec<usize> = (0..n).filter(|i| mask >> i & 1 == 1).collect();
        if !is_proper_combination(atoms, &members, x)? {
            continue;
        }
        let mut lo = scores[s_best];
        let hi = scores[s_best].max(members.iter().map(|&i| scores[i]).fold(f64::NEG_INFINITY, f64::max));
        for &i in &members {
            lo = lo.min(scores[i]);
        }
        let w = hi - lo;
        best = Some(best.map_or(w, |b: f64| b.min(w)));
    }
    best.ok_or(Error::NotInHull)
}

/// Does `x` admit a representation as a proper convex combination of all
/// the listed atoms? Decided by maximizing the smallest coefficient.
fn is_proper_combination(atoms: &[crate::atoms::Atom], members: &[usize], x: &[f64]) -> Result<bool> {
    let d = x.len();
    let k = members.len();
    // Variables [m, phi_1..phi_k] with theta_i = m + phi_i:
    //   sum_i theta_i p_i = x,  sum_i theta_i = 1,  maximize m.
    let mut a = ndarray::Array2::<f64>::zeros((d + 1, k + 1));
    let mut b = vec![0.0; d + 1];
    for (col, &i) in members.iter().enumerate() {
        let p = atoms[i].to_dense();
        for row in 0..d {
            a[[row, col + 1]] = p[row];
            a[[row, 0]] += p[row];
        }
        a[[d, col + 1]] = 1.0;
    }
    a[[d, 0]] = k as f64;
    b[..d].copy_from_slice(x);
    b[d] = 1.0;
    let mut c = vec![0.0; k + 1];
    c[0] = -1.0;
    match coneproj::solve_lp(&a, &b, &c) {
        Ok(sol) => Ok(sol.x[0] > PROPER_TOL),
        Err(Error::Infeasible) => Ok(false),
        Err(e) => Err(e),
    }
}

// ---------------------------------------------------------------------------
// 2D machinery

fn points2d(set: &AtomSet) -> Result<Vec<(AtomId, [f64; 2])>> {
    let atoms = set.atoms().ok_or(Error::ExactLmoUnavailable)?;
    if set.ambient_dim() != 2 {
        return Err(Error::NotTwoDimensional);
    }
    Ok(atoms
        .iter()
        .map(|a| {
            let v = a.to_dense();
            (a.id(), [v[0], v[1]])
        })
        .collect())
}

fn face_points(set: &AtomSet, ids: &[AtomId]) -> Result<Vec<(AtomId, [f64; 2])>> {
    let all = points2d(set)?;
    Ok(all.into_iter().filter(|(id, _)| ids.contains(id)).collect())
}

/// `PdirW(points, r, x)` through the sorted-prefix argument: the best
/// worst-atom score over admissible subsets is the score at which `x` first
/// enters the hull of the top-scoring prefix.
fn prefix_eval(points: &[(AtomId, [f64; 2])], r: [f64; 2], x: [f64; 2]) -> Option<f64> {
    let rn = (r[0] * r[0] + r[1] * r[1]).sqrt();
    if rn == 0.0 {
        return None;
    }
    let rh = [r[0] / rn, r[1] / rn];
    let scale = points.iter().map(|(_, p)| p[0].hypot(p[1])).fold(1.0f64, f64::max);
    let tol = 1e-10 * scale;

    let mut order: Vec<usize> = (0..points.len()).collect();
    let score = |i: usize| rh[0] * points[i].1[0] + rh[1] * points[i].1[1];
    order.sort_by(|&a, &b| {
        score(b)
            .partial_cmp(&score(a))
            .unwrap()
            .then(points[a].0.cmp(&points[b].0))
    });
    let smax = score(order[0]);

    let mut prefix: Vec<[f64; 2]> = Vec::with_capacity(points.len());
    for &i in &order {
        prefix.push(points[i].1);
        if hull_contains(&prefix, x, tol) {
            return Some(smax - score(i));
        }
    }
    None
}

/// Is `x` in the convex hull of `pts` (closed, within `tol`)?
fn hull_contains(pts: &[[f64; 2]], x: [f64; 2], tol: f64) -> bool {
    match pts.len() {
        0 => false,
        1 => dist(pts[0], x) <= tol,
        _ => {
            let hull = convex_hull(pts);
            if hull.len() == 1 {
                return dist(hull[0], x) <= tol;
            }
            if hull.len() == 2 {
                return segment_contains(hull[0], hull[1], x, tol);
            }
            // CCW polygon: x is inside when no edge sees it strictly outside.
            for w in hull.windows(2).chain(std::iter::once(
                [*hull.last().unwrap(), hull[0]].as_slice(),
            )) {
                let (a, b) = (w[0], w[1]);
                let cross = (b[0] - a[0]) * (x[1] - a[1]) - (b[1] - a[1]) * (x[0] - a[0]);
                if cross < -tol * (1.0 + dist(a, b)) {
                    return false;
                }
            }
            true
        }
    }
}

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

fn segment_contains(a: [f64; 2], b: [f64; 2], x: [f64; 2], tol: f64) -> bool {
    let ab = [b[0] - a[0], b[1] - a[1]];
    let len_sq = ab[0] * ab[0] + ab[1] * ab[1];
    if len_sq == 0.0 {
        return dist(a, x) <= tol;
    }
    let t = ((x[0] - a[0]) * ab[0] + (x[1] - a[1]) * ab[1]) / len_sq;
    let t = t.clamp(0.0, 1.0);
    dist([a[0] + t * ab[0], a[1] + t * ab[1]], x) <= tol
}

/// Andrew monotone chain; returns hull vertices in CCW order.
fn convex_hull(pts: &[[f64; 2]]) -> Vec<[f64; 2]> {
    let mut sorted: Vec<[f64; 2]> = pts.to_vec();
    sorted.sort_by(|a, b| a[0].partial_cmp(&b[0]).unwrap().then(a[1].partial_cmp(&b[1]).unwrap()));
    sorted.dedup_by(|a, b| dist(*a, *b) == 0.0);
    let n = sorted.len();
    if n <= 2 {
        return sorted;
    }
    let cross = |o: [f64; 2], a: [f64; 2], b: [f64; 2]| {
        (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
    };
    let mut lower: Vec<[f64; 2]> = Vec::new();
    for &p in &sorted {
        while lower.len() >= 2 && cross(lower[lower.len() - 2], lower[lower.len() - 1], p) <= 0.0 {
            lower.pop();
        }
        lower.push(p);
    }
    let mut upper: Vec<[f64; 2]> = Vec::new();
    for &p in sorted.iter().rev() {
        while upper.len() >= 2 && cross(upper[upper.len() - 2], upper[upper.len() - 1], p) <= 0.0 {
            upper.pop();
        }
        upper.push(p);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    if lower.is_empty() {
        // all points collinear: keep the extremes
        vec![sorted[0], sorted[n - 1]]
    } else {
        lower
    }
}

#[derive(Debug, Clone)]
struct FaceSpec {
    ids: Vec<AtomId>,
    one_dimensional: bool,
}

/// Enumerate the generating faces of `cone(A)` for a 2D set: the convex
/// hull cap, plus the boundary ray segments when the cone is pointed or a
/// halfplane. Collinear sets reduce to a single segment face.
fn enumerate_faces(points: &[(AtomId, [f64; 2])]) -> Result<Vec<FaceSpec>> {
    let nonzero: Vec<&(AtomId, [f64; 2])> =
        points.iter().filter(|(_, p)| p[0] != 0.0 || p[1] != 0.0).collect();
    if nonzero.is_empty() {
        return Err(Error::DegenerateCone);
    }
    let all_ids: Vec<AtomId> = points.iter().map(|(id, _)| *id).collect();

    let mut angles: Vec<f64> = nonzero
        .iter()
        .map(|(_, p)| {
            let a = p[1].atan2(p[0]);
            if a < 0.0 {
                a + 2.0 * std::f64::consts::PI
            } else {
                a
            }
        })
        .collect();
    angles.sort_by(|a, b| a.partial_cmp(b).unwrap());
    angles.dedup_by(|a, b| (*a - *b).abs() <= 1e-12);

    let two_pi = 2.0 * std::f64::consts::PI;
    if angles.len() == 1 {
        // single ray
        return Ok(vec![FaceSpec { ids: all_ids, one_dimensional: true }]);
    }
    let mut max_gap = 0.0f64;
    let mut gap_at = 0usize;
    for i in 0..angles.len() {
        let next = if i + 1 == angles.len() { angles[0] + two_pi } else { angles[i + 1] };
        let gap = next - angles[i];
        if gap > max_gap {
            max_gap = gap;
            gap_at = i;
        }
    }
    let angle_tol = 1e-9;
    if angles.len() == 2 && (max_gap - std::f64::consts::PI).abs() <= angle_tol {
        // opposite rays: cone(A) is a line, conv(A) a segment through 0
        return Ok(vec![FaceSpec { ids: all_ids, one_dimensional: true }]);
    }

    let mut faces = vec![FaceSpec { ids: all_ids, one_dimensional: false }];
    if max_gap > std::f64::consts::PI - angle_tol {
        // pointed cone or halfplane: the rays bounding the gap are faces
        let hi_angle = angles[gap_at];
        let lo_angle = angles[(gap_at + 1) % angles.len()];
        for boundary in [lo_angle, hi_angle] {
            let mut ids: Vec<AtomId> = points
                .iter()
                .filter(|(_, p)| {
                    if p[0] == 0.0 && p[1] == 0.0 {
                        return true; // the origin belongs to every ray segment
                    }
                    let mut a = p[1].atan2(p[0]);
                    if a < 0.0 {
                        a += two_pi;
                    }
                    let mut diff = (a - boundary).abs();
                    if diff > std::f64::consts::PI {
                        diff = two_pi - diff;
                    }
                    diff <= 1e-9
                })
                .map(|(id, _)| *id)
                .collect();
            ids.sort();
            ids.dedup();
            faces.push(FaceSpec { ids, one_dimensional: true });
        }
    }
    Ok(faces)
}

/// Exact 2D cone width: sweep every generating face with witness points at
/// face atoms and pairwise midpoints, minimizing the pyramidal directional
/// width over the feasible directions by a dense angular grid with
/// golden-section refinement.
pub fn cone_width_2d(set: &AtomSet) -> Result<WidthReport> {
    let points = points2d(set)?;
    if !set.contains_origin() {
        return Err(Error::OriginRequired);
    }
    if points.len() > CONE_WIDTH_MAX_ATOMS {
        return Err(Error::SetTooLarge { limit: CONE_WIDTH_MAX_ATOMS, got: points.len() });
    }
    let faces = enumerate_faces(&points)?;

    let mut best: Option<(f64, WidthCertificate)> = None;
    for face in &faces {
        let face_pts: Vec<(AtomId, [f64; 2])> =
            points.iter().filter(|(id, _)| face.ids.contains(id)).cloned().collect();
        let candidate = if face.one_dimensional {
            sweep_segment_face(&face_pts)
        } else {
            sweep_cap_face(&face_pts)
        };
        if let Some((value, x, r)) = candidate {
            let better = best.as_ref().map_or(true, |(b, _)| value < *b);
            if better {
                best = Some((
                    value,
                    WidthCertificate {
                        face_atom_ids: face.ids.clone(),
                        reference_point: x.to_vec(),
                        direction: r.to_vec(),
                    },
                ));
            }
        }
    }
    let (value, certificate) = best.ok_or(Error::DegenerateCone)?;
    Ok(WidthReport {
        value,
        kind: WidthKind::ConeWidth,
        certificate: Some(certificate),
        method: WidthMethod::Exact2D,
    })
}

fn witness_points(face_pts: &[(AtomId, [f64; 2])]) -> Vec<[f64; 2]> {
    let mut witnesses: Vec<[f64; 2]> = face_pts.iter().map(|(_, p)| *p).collect();
    for i in 0..face_pts.len() {
        for j in (i + 1)..face_pts.len() {
            let (a, b) = (face_pts[i].1, face_pts[j].1);
            witnesses.push([(a[0] + b[0]) / 2.0, (a[1] + b[1]) / 2.0]);
        }
    }
    witnesses.dedup_by(|a, b| dist(*a, *b) <= 1e-14);
    witnesses
}

/// Width of a one-dimensional face (segment through the origin): the only
/// feasible directions are along the segment axis.
fn sweep_segment_face(face_pts: &[(AtomId, [f64; 2])]) -> Option<(f64, [f64; 2], [f64; 2])> {
    let axis = face_pts
        .iter()
        .map(|(_, p)| *p)
        .find(|p| p[0] != 0.0 || p[1] != 0.0)?;
    let len = axis[0].hypot(axis[1]);
    let axis = [axis[0] / len, axis[1] / len];
    let t_of = |p: [f64; 2]| p[0] * axis[0] + p[1] * axis[1];
    let ts: Vec<f64> = face_pts.iter().map(|(_, p)| t_of(*p)).collect();
    let t_min = ts.iter().cloned().fold(f64::INFINITY, f64::min);
    let t_max = ts.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let scale = t_max.abs().max(t_min.abs()).max(1.0);
    let tol = 1e-12 * scale;

    let mut best: Option<(f64, [f64; 2], [f64; 2])> = None;
    for x in witness_points(face_pts) {
        let t = t_of(x);
        let mut dirs: Vec<[f64; 2]> = Vec::new();
        if t < t_max - tol {
            dirs.push(axis);
        }
        if t > t_min + tol {
            dirs.push([-axis[0], -axis[1]]);
        }
        for r in dirs {
            if let Some(v) = prefix_eval(face_pts, r, x) {
                if best.as_ref().map_or(true, |(b, _, _)| v < *b) {
                    best = Some((v, x, r));
                }
            }
        }
    }
    best
}

/// Width of the two-dimensional hull cap: minimize over witnesses and the
/// feasible angular arcs at each witness.
fn sweep_cap_face(face_pts: &[(AtomId, [f64; 2])]) -> Option<(f64, [f64; 2], [f64; 2])> {
    let pts: Vec<[f64; 2]> = face_pts.iter().map(|(_, p)| *p).collect();
    let hull = convex_hull(&pts);
    if hull.len() < 3 {
        return sweep_segment_face(face_pts);
    }
    let scale = pts.iter().map(|p| p[0].hypot(p[1])).fold(1.0f64, f64::max);
    let act_tol = 1e-9 * scale;

    // Outward edge normals of the CCW hull.
    let mut edges: Vec<([f64; 2], f64)> = Vec::new();
    for i in 0..hull.len() {
        let a = hull[i];
        let b = hull[(i + 1) % hull.len()];
        let e = [b[0] - a[0], b[1] - a[1]];
        let elen = e[0].hypot(e[1]);
        if elen == 0.0 {
            continue;
        }
        let n = [e[1] / elen, -e[0] / elen];
        edges.push((n, n[0] * a[0] + n[1] * a[1]));
    }

    let mut best: Option<(f64, [f64; 2], [f64; 2])> = None;
    for x in witness_points(face_pts) {
        let active: Vec<[f64; 2]> = edges
            .iter()
            .filter(|(n, off)| (n[0] * x[0] + n[1] * x[1] - off).abs() <= act_tol)
            .map(|(n, _)| *n)
            .collect();
        let arcs = feasible_arcs(&active);
        for (lo, hi) in arcs {
            if let Some((v, phi)) = minimize_on_arc(face_pts, x, lo, hi) {
                if best.as_ref().map_or(true, |(b, _, _)| v < *b) {
                    best = Some((v, x, [phi.cos(), phi.sin()]));
                }
            }
        }
    }
    best
}

/// Intersect the half-circles `<n, r> <= 0` into angular arcs `[lo, hi]`.
fn feasible_arcs(active_normals: &[[f64; 2]]) -> Vec<(f64, f64)> {
    let two_pi = 2.0 * std::f64::consts::PI;
    if active_normals.is_empty() {
        return vec![(0.0, two_pi)];
    }
    let mut arcs = vec![(0.0, two_pi)];
    for n in active_normals {
        // allowed angles: [angle(n) + pi/2, angle(n) + 3pi/2]
        let a = n[1].atan2(n[0]);
        let lo = a + std::f64::consts::FRAC_PI_2;
        let hi = a + 3.0 * std::f64::consts::FRAC_PI_2;
        let mut next = Vec::new();
        for (alo, ahi) in arcs {
            // intersect [alo, ahi] with [lo, hi] treating angles mod 2 pi
            for shift in [-two_pi, 0.0, two_pi] {
                let l = (lo + shift).max(alo);
                let h = (hi + shift).min(ahi);
                if h > l + 1e-15 {
                    next.push((l, h));
                }
            }
        }
        arcs = next;
        if arcs.is_empty() {
            break;
        }
    }
    arcs
}

/// Grid sweep plus golden-section refinement of
/// `phi -> PdirW(face, r(phi), x)` on `[lo, hi]`.
fn minimize_on_arc(
    face_pts: &[(AtomId, [f64; 2])],
    x: [f64; 2],
    lo: f64,
    hi: f64,
) -> Option<(f64, f64)> {
    let span = hi - lo;
    if span <= 0.0 {
        return None;
    }
    let eval = |phi: f64| prefix_eval(face_pts, [phi.cos(), phi.sin()], x);
    let n = ((ANGLE_GRID as f64 * span / (2.0 * std::f64::consts::PI)).ceil() as usize).max(8);
    let mut best: Option<(f64, f64)> = None;
    let mut best_idx = 0usize;
    for k in 0..=n {
        let phi = lo + span * k as f64 / n as f64;
        if let Some(v) = eval(phi) {
            if best.map_or(true, |(b, _)| v < b) {
                best = Some((v, phi));
                best_idx = k;
            }
        }
    }
    let (mut best_v, mut best_phi) = best?;

    // Refine inside the bracketing cells around the grid argmin.
    let a = lo + span * best_idx.saturating_sub(1) as f64 / n as f64;
    let b = lo + span * (best_idx + 1).min(n) as f64 / n as f64;
    let (v, phi) = golden_section(&eval, a, b);
    if v < best_v {
        best_v = v;
        best_phi = phi;
    }
    Some((best_v, best_phi))
}

fn golden_section(eval: &dyn Fn(f64) -> Option<f64>, mut a: f64, mut b: f64) -> (f64, f64) {
    let inv_phi = (5.0f64.sqrt() - 1.0) / 2.0;
    let f = |p: f64| eval(p).unwrap_or(f64::INFINITY);
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while (b - a) > GOLDEN_TOL {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    let mid = 0.5 * (a + b);
    (f(mid), mid)
}

/// Minimal directional width `min_{d in lin(A)} max_{z in A} <d/||d||, z>`.
/// Exact angular sweep in 2D; certified sampling otherwise.
pub fn mdw(set: &AtomSet) -> Result<f64> {
    Ok(mdw_report(set)?.value)
}

pub fn mdw_report(set: &AtomSet) -> Result<WidthReport> {
    let atoms = set.atoms().ok_or(Error::ExactLmoUnavailable)?;
    let d = set.ambient_dim();
    if atoms.iter().all(|a| a.norm_sq() == 0.0) {
        return Err(Error::DegenerateSet);
    }
    if d == 2 {
        let points = points2d(set)?;
        let eval = |r: [f64; 2]| {
            points
                .iter()
                .map(|(_, p)| r[0] * p[0] + r[1] * p[1])
                .fold(f64::NEG_INFINITY, f64::max)
        };
        // Span may still be a line; then only the two axis directions count.
        let nz: Vec<[f64; 2]> = points
            .iter()
            .map(|(_, p)| *p)
            .filter(|p| p[0] != 0.0 || p[1] != 0.0)
            .collect();
        let rank2 = nz
            .iter()
            .any(|p| (p[0] * nz[0][1] - p[1] * nz[0][0]).abs() > 1e-14 * (1.0 + p[0].hypot(p[1])));
        let (value, dir) = if !rank2 {
            let len = nz[0][0].hypot(nz[0][1]);
            let axis = [nz[0][0] / len, nz[0][1] / len];
            let fwd = eval(axis);
            let bwd = eval([-axis[0], -axis[1]]);
            if fwd <= bwd {
                (fwd, axis)
            } else {
                (bwd, [-axis[0], -axis[1]])
            }
        } else {
            let g = |phi: f64| Some(eval([phi.cos(), phi.sin()]));
            let two_pi = 2.0 * std::f64::consts::PI;
            let mut best = (f64::INFINITY, 0.0f64);
            let mut best_idx = 0usize;
            for k in 0..ANGLE_GRID {
                let phi = two_pi * k as f64 / ANGLE_GRID as f64;
                let v = g(phi).unwrap();
                if v < best.0 {
                    best = (v, phi);
                    best_idx = k;
                }
            }
            let a = two_pi * (best_idx as f64 - 1.0) / ANGLE_GRID as f64;
            let b = two_pi * (best_idx as f64 + 1.0) / ANGLE_GRID as f64;
            let (v, phi) = golden_section(&g, a, b);
            if v < best.0 {
                best = (v, phi);
            }
            (best.0, [best.1.cos(), best.1.sin()])
        };
        return Ok(WidthReport {
            value,
            kind: WidthKind::Mdw,
            certificate: Some(WidthCertificate {
                face_atom_ids: atoms.iter().map(|a| a.id()).collect(),
                reference_point: vec![0.0, 0.0],
                direction: dir.to_vec(),
            }),
            method: WidthMethod::Exact2D,
        });
    }

    // Certified sampling in the linear span.
    let basis = span_basis(set);
    if basis.is_empty() {
        return Err(Error::DegenerateSet);
    }
    let n_samples = 50_000usize;
    let mut rng = ChaCha8Rng::seed_from_u64(0x636f_6e65);
    let mut best = f64::INFINITY;
    let mut best_dir = vec![0.0; d];
    for _ in 0..n_samples {
        let mut dir = vec![0.0; d];
        for b in &basis {
            let coef: f64 = rng.sample(rand::distributions::Standard);
            linalg::axpy(coef - 0.5, b, &mut dir);
        }
        let n = linalg::norm(&dir);
        if n == 0.0 {
            continue;
        }
        linalg::scale(&mut dir, 1.0 / n);
        let v = atoms.iter().map(|a| a.dot_point(&dir)).fold(f64::NEG_INFINITY, f64::max);
        if v < best {
            best = v;
            best_dir = dir;
        }
    }
    Ok(WidthReport {
        value: best,
        kind: WidthKind::Mdw,
        certificate: Some(WidthCertificate {
            face_atom_ids: atoms.iter().map(|a| a.id()).collect(),
            reference_point: vec![0.0; d],
            direction: best_dir,
        }),
        method: WidthMethod::Sampled { n_samples },
    })
}

fn span_basis(set: &AtomSet) -> Vec<Vec<f64>> {
    let atoms = set.atoms().expect("finite set");
    let mut basis: Vec<Vec<f64>> = Vec::new();
    for a in atoms {
        let mut v = a.to_dense();
        for b in &basis {
            let c = linalg::dot(&v, b);
            linalg::axpy(-c, b, &mut v);
        }
        let n = linalg::norm(&v);
        if n > 1e-12 {
            linalg::scale(&mut v, 1.0 / n);
            basis.push(v);
        }
    }
    basis
}

/// The linear-rate constant `beta = delta^2 mu CW^2 / (L diam(A)^2)`,
/// clipped to at most 1. Returns 0 when `mu = 0` (sublinear regime).
pub fn theoretical_beta(set: &AtomSet, l: f64, mu: f64, delta: f64) -> Result<f64> {
    if mu == 0.0 {
        return Ok(0.0);
    }
    let cw = cone_width_2d(set)?.value;
    let diam = crate::atoms::diameter(set)?;
    let beta = delta * delta * mu * cw * cw / (l * diam * diam);
    Ok(beta.min(1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn set_from(vectors: Vec<Vec<f64>>) -> AtomSet {
        AtomSet::finite(vectors).unwrap()
    }

    /// The symmetric two-ray family: rays at angles 0 and theta plus their
    /// negations and the origin.
    fn two_ray_family(theta: f64) -> AtomSet {
        set_from(vec![
            vec![0.0, 0.0],
            vec![-1.0, 0.0],
            vec![theta.cos(), theta.sin()],
            vec![1.0, 0.0],
            vec![-theta.cos(), -theta.sin()],
        ])
    }

    #[test]
    fn dir_width_examples() {
        let ray = set_from(vec![vec![0.0, 0.0], vec![1.0, 0.0]]);
        assert!((dir_width(&ray, &[1.0, 0.0]).unwrap() - 1.0).abs() < 1e-15);

        let basis = set_from(vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0]]);
        let w = dir_width(&basis, &[1.0, -1.0]).unwrap();
        assert!((w - 2.0f64.sqrt()).abs() < 1e-12);

        let fwd = dir_width(&basis, &[0.3, 0.7]).unwrap();
        let bwd = dir_width(&basis, &[-0.3, -0.7]).unwrap();
        assert!((fwd - bwd).abs() < 1e-15);

        assert!(matches!(dir_width(&basis, &[0.0, 0.0]), Err(Error::ZeroDirection)));
    }

    #[test]
    fn dir_width_translation_invariant() {
        let base = vec![vec![0.1, 0.4], vec![0.9, -0.3], vec![-0.5, 0.2]];
        let shifted: Vec<Vec<f64>> =
            base.iter().map(|v| vec![v[0] + 3.0, v[1] - 2.0]).collect();
        let r = [0.6, -0.8];
        let a = dir_width(&set_from(base), &r).unwrap();
        let b = dir_width(&set_from(shifted), &r).unwrap();
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn pdir_width_singleton_reference() {
        let set = set_from(vec![vec![1.0, 0.0], vec![0.0, 1.0]]);
        // x = e2 exactly: the only admissible subset is {e2}.
        let r = [1.0, 0.3];
        let v = pdir_width(&set, &r, &[0.0, 1.0]).unwrap();
        let rn = (r[0] * r[0] + r[1] * r[1]).sqrt();
        // s(A, r) = e1; dirW({e2, e1}, r) = (r1 - r2)/||r||
        assert!((v - (r[0] - r[1]) / rn).abs() < 1e-9);
    }

    #[test]
    fn pdir_width_interior_point_enumeration() {
        let set = set_from(vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0]]);
        // x = (0.25, 0.25): proper combination of {0, e1, e2} only.
        let v = pdir_width(&set, &[1.0, 0.0], &[0.25, 0.25]).unwrap();
        // s = e1 (score 1); worst member score is 0 (both 0 and e2).
        assert!((v - 1.0).abs() < 1e-9);
    }

    #[test]
    fn pdir_width_not_in_hull() {
        let set = set_from(vec![vec![1.0, 0.0], vec![0.0, 1.0]]);
        assert!(matches!(
            pdir_width(&set, &[1.0, 0.0], &[2.0, 2.0]),
            Err(Error::NotInHull)
        ));
    }

    #[test]
    fn pdir_width_matches_prefix_evaluator() {
        // Dual-implementation oracle: subset enumeration with the strict
        // positivity LP against the sorted-prefix evaluation.
        let vectors = vec![
            vec![0.0, 0.0],
            vec![1.0, 0.1],
            vec![0.2, 0.9],
            vec![-0.4, 0.5],
            vec![0.6, 0.6],
        ];
        let set = set_from(vectors.clone());
        let points: Vec<(AtomId, [f64; 2])> = set
            .atoms()
            .unwrap()
            .iter()
            .map(|a| {
                let v = a.to_dense();
                (a.id(), [v[0], v[1]])
            })
            .collect();
        let mut state = 0x1234_5678_9abc_def0u64;
        let mut next = move || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f64 / (1u64 << 53) as f64
        };
        for _ in 0..25 {
            // random feasible x: convex combination with random weights
            let mut w: Vec<f64> = (0..5).map(|_| next() + 1e-3).collect();
            let s: f64 = w.iter().sum();
            w.iter_mut().for_each(|v| *v /= s);
            let mut x = [0.0f64; 2];
            for (wi, v) in w.iter().zip(&vectors) {
                x[0] += wi * v[0];
                x[1] += wi * v[1];
            }
            let phi = next() * 2.0 * PI;
            let r = [phi.cos(), phi.sin()];
            let enumerated = pdir_width(&set, &r, &x).unwrap();
            let prefixed = prefix_eval(&points, r, x).unwrap();
            assert!(
                (enumerated - prefixed).abs() < 1e-7,
                "enumeration {enumerated} vs prefix {prefixed}"
            );
        }
    }

    #[test]
    fn cone_width_matches_closed_form_family() {
        for theta in [PI / 6.0, PI / 4.0, PI / 3.0, PI / 2.0] {
            let set = two_ray_family(theta);
            let report = cone_width_2d(&set).unwrap();
            let expected = (theta / 2.0).sin();
            assert!(
                (report.value - expected).abs() < 1e-9,
                "theta {theta}: {} vs {}",
                report.value,
                expected
            );
            let re = report.reevaluate(&set).unwrap();
            assert!((re - report.value).abs() < 1e-12);
        }
    }

    #[test]
    fn cone_width_equals_mdw_for_symmetric_cross() {
        let set = set_from(vec![
            vec![0.0, 0.0],
            vec![1.0, 0.0],
            vec![0.0, 1.0],
            vec![-1.0, 0.0],
            vec![0.0, -1.0],
        ]);
        let cw = cone_width_2d(&set).unwrap().value;
        let m = mdw(&set).unwrap();
        assert!((cw - m).abs() < 1e-9);
        assert!((m - 1.0 / 2.0f64.sqrt()).abs() < 1e-9);
    }

    #[test]
    fn cone_width_of_ray_uses_single_face_path() {
        let set = set_from(vec![vec![0.0, 0.0], vec![1.0, 0.0]]);
        let report = cone_width_2d(&set).unwrap();
        assert!((report.value - 1.0).abs() < 1e-9);
    }

    #[test]
    fn cone_width_scales_linearly() {
        let set = two_ray_family(PI / 3.0);
        let scaled = set.scaled(2.5).unwrap();
        let a = cone_width_2d(&set).unwrap().value;
        let b = cone_width_2d(&scaled).unwrap().value;
        assert!((b - 2.5 * a).abs() < 1e-8);
    }

    #[test]
    fn mdw_examples() {
        let ray = set_from(vec![vec![0.0, 0.0], vec![1.0, 0.0]]);
        assert!(mdw(&ray).unwrap().abs() < 1e-12);

        // Dense symmetric circle samples approach 1.
        let n = 720;
        let mut vectors = vec![vec![0.0, 0.0]];
        for k in 0..n {
            let a = 2.0 * PI * k as f64 / n as f64;
            vectors.push(vec![a.cos(), a.sin()]);
        }
        let circle = set_from(vectors);
        let v = mdw(&circle).unwrap();
        assert!((v - 1.0).abs() < 1e-4, "dense circle mdw = {v}");
    }

    #[test]
    fn mdw_sampled_in_higher_dimension() {
        let set = set_from(vec![
            vec![0.0, 0.0, 0.0],
            vec![1.0, 0.0, 0.0],
            vec![-1.0, 0.0, 0.0],
            vec![0.0, 1.0, 0.0],
            vec![0.0, -1.0, 0.0],
            vec![0.0, 0.0, 1.0],
            vec![0.0, 0.0, -1.0],
        ]);
        let report = mdw_report(&set).unwrap();
        assert!(matches!(report.method, WidthMethod::Sampled { .. }));
        // True value is 1/sqrt(3); sampling overestimates slightly.
        let exact = 1.0 / 3.0f64.sqrt();
        assert!(report.value >= exact - 1e-9);
        assert!(report.value <= exact + 0.02);
    }

    #[test]
    fn theoretical_beta_scalings() {
        let set = two_ray_family(PI / 2.0);
        let b1 = theoretical_beta(&set, 1.0, 1.0, 1.0).unwrap();
        let bh = theoretical_beta(&set, 1.0, 1.0, 0.5).unwrap();
        assert!((bh - 0.25 * b1).abs() < 1e-12);
        assert_eq!(theoretical_beta(&set, 1.0, 0.0, 1.0).unwrap(), 0.0);
        // closed form: sin^2(pi/4) / diam^2 with diam = 2
        assert!((b1 - 0.5 / 4.0).abs() < 1e-9);
    }

    #[test]
    fn face2d_invariant_validation() {
        let set = set_from(vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0]]);
        // the x-axis ray face supported by normal (0, -1)... outward is -y
        let ids = vec![AtomId(0), AtomId(1)];
        let face = Face2D::new(&set, ids, [0.0, -1.0]).unwrap();
        assert_eq!(face.atom_ids.len(), 2);
        // wrong normal: e2 ends up on the positive side
        assert!(Face2D::new(&set, vec![AtomId(0), AtomId(1)], [0.0, 1.0]).is_err());
    }

    #[test]
    fn all_width_values_non_negative() {
        let set = two_ray_family(1.1);
        assert!(cone_width_2d(&set).unwrap().value >= 0.0);
        assert!(mdw(&set).unwrap() >= 0.0);
        assert!(dir_width(&set, &[0.3, 0.4]).unwrap() >= 0.0);
    }
}
