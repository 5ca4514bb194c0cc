//! Weighted active set of atoms with a cached iterate.

use std::collections::BTreeMap;

use crate::atoms::{Atom, AtomId};
use crate::linalg;

/// The atoms currently carrying weight, with the reconstructed iterate
/// `x = sum_i alpha_i a_i` kept incrementally. Conic sets enforce
/// `alpha >= 0` and prune weights at or below `prune_eps`; the signed mode
/// exists for the span-baseline solver whose corrections may go negative.
///
/// The cached iterate is recomputed from the weights every 100 updates to
/// bound additive rounding drift.
#[derive(Debug, Clone)]
pub struct ActiveSet {
    dim: usize,
    entries: BTreeMap<AtomId, (Atom, f64)>,
    x: Vec<f64>,
    prune_eps: f64,
    signed: bool,
    updates: usize,
    min_weight_seen: f64,
}

const REFRESH_EVERY: usize = 100;

impl ActiveSet {
    pub fn new(dim: usize, prune_eps: f64) -> Self {
        ActiveSet {
            dim,
            entries: BTreeMap::new(),
            x: vec![0.0; dim],
            prune_eps,
            signed: false,
            updates: 0,
            min_weight_seen: f64::INFINITY,
        }
    }

    pub fn new_signed(dim: usize, prune_eps: f64) -> Self {
        ActiveSet { signed: true, ..Self::new(dim, prune_eps) }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn iterate(&self) -> &[f64] {
        &self.x
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn weight(&self, id: AtomId) -> f64 {
        self.entries.get(&id).map_or(0.0, |(_, w)| *w)
    }

    /// Smallest weight ever stored, including transient values before
    /// pruning. Stays non-negative for conic runs.
    pub fn min_weight_seen(&self) -> f64 {
        if self.min_weight_seen == f64::INFINITY {
            0.0
        } else {
            self.min_weight_seen
        }
    }

    /// Sum of weights; a certificate upper bound on the iterate's atomic
    /// norm for conic sets. Signed sets report the absolute sum.
    pub fn coeff_sum(&self) -> f64 {
        self.entries.values().map(|(_, w)| if self.signed { w.abs() } else { *w }).sum()
    }

    pub fn entries(&self) -> impl Iterator<Item = (&Atom, f64)> {
        self.entries.values().map(|(a, w)| (a, *w))
    }

    pub fn atoms_and_weights(&self) -> (Vec<Atom>, Vec<f64>) {
        let atoms = self.entries.values().map(|(a, _)| a.clone()).collect();
        let weights = self.entries.values().map(|(_, w)| *w).collect();
        (atoms, weights)
    }

    /// Merge `delta` into the atom's weight, updating the iterate. Weights
    /// that land at or below `prune_eps` (in absolute value for signed sets)
    /// are removed together with their contribution.
    pub fn add_weight(&mut self, atom: &Atom, delta: f64) {
        debug_assert_eq!(atom.ambient_dim(), self.dim);
        atom.add_scaled_into(delta, &mut self.x);
        let entry = self
            .entries
            .entry(atom.id())
            .or_insert_with(|| (atom.clone(), 0.0));
        entry.1 += delta;
        let w = entry.1;
        self.min_weight_seen = self.min_weight_seen.min(w);
        let prune = if self.signed { w.abs() <= self.prune_eps } else { w <= self.prune_eps };
        if prune {
            atom.add_scaled_into(-w, &mut self.x);
            self.entries.remove(&atom.id());
        }
        self.bump();
    }

    /// Multiply every weight (and the iterate) by `factor`.
    pub fn scale_all(&mut self, factor: f64) {
        let factor = if self.signed { factor } else { factor.max(0.0) };
        if factor == 0.0 {
            self.entries.clear();
            self.x.iter_mut().for_each(|v| *v = 0.0);
            return;
        }
        for (_, w) in self.entries.values_mut() {
            *w *= factor;
            self.min_weight_seen = self.min_weight_seen.min(*w);
        }
        linalg::scale(&mut self.x, factor);
        let eps = self.prune_eps;
        let stale: Vec<AtomId> = self
            .entries
            .iter()
            .filter(|(_, (_, w))| if self.signed { w.abs() <= eps } else { *w <= eps })
            .map(|(id, _)| *id)
            .collect();
        for id in stale {
            let (atom, w) = self.entries.remove(&id).expect("id present");
            atom.add_scaled_into(-w, &mut self.x);
        }
        self.bump();
    }

    /// Replace the whole weight vector (full-corrective updates). The
    /// iterate is rebuilt from scratch, so correction steps carry no drift.
    pub fn set_weights(&mut self, atoms: &[Atom], weights: &[f64]) {
        debug_assert_eq!(atoms.len(), weights.len());
        self.entries.clear();
        for (atom, &w) in atoms.iter().zip(weights) {
            self.min_weight_seen = self.min_weight_seen.min(w);
            let keep = if self.signed { w.abs() > self.prune_eps } else { w > self.prune_eps };
            if keep {
                self.entries.insert(atom.id(), (atom.clone(), w));
            }
        }
        self.refresh();
    }

    /// Recompute the cached iterate from the weights.
    pub fn refresh(&mut self) {
        self.x.iter_mut().for_each(|v| *v = 0.0);
        for (atom, w) in self.entries.values() {
            atom.add_scaled_into(*w, &mut self.x);
        }
        self.updates = 0;
    }

    /// Active atom maximizing `<grad, v>`; ties broken by smallest id.
    pub fn max_score(&self, grad: &[f64]) -> Option<(Atom, f64)> {
        let mut best: Option<(&Atom, f64)> = None;
        for (atom, _) in self.entries.values() {
            let s = atom.dot_point(grad);
            match best {
                Some((_, bs)) if s <= bs => {}
                _ => best = Some((atom, s)),
            }
        }
        best.map(|(a, s)| (a.clone(), s))
    }

    fn bump(&mut self) {
        self.updates += 1;
        if self.updates >= REFRESH_EVERY {
            self.refresh();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::atoms::Atom;

    fn atom(id: u64, v: Vec<f64>) -> Atom {
        Atom::dense(AtomId(id), v).unwrap()
    }

    #[test]
    fn add_and_prune() {
        let mut s = ActiveSet::new(2, 1e-12);
        let a = atom(1, vec![1.0, 0.0]);
        s.add_weight(&a, 2.0);
        assert_eq!(s.iterate(), &[2.0, 0.0]);
        s.add_weight(&a, -2.0);
        assert!(s.is_empty());
        assert_eq!(s.iterate(), &[0.0, 0.0]);
    }

    #[test]
    fn cached_iterate_tracks_recomputed_sum() {
        let mut s = ActiveSet::new(2, 1e-12);
        let a = atom(1, vec![0.3, 0.7]);
        let b = atom(2, vec![0.9, 0.1]);
        for i in 0..500 {
            s.add_weight(&a, 0.01 * ((i % 7) as f64 + 1.0));
            s.add_weight(&b, 0.003);
            if i % 11 == 0 {
                s.scale_all(0.95);
            }
        }
        let mut exact = vec![0.0; 2];
        for (atom, w) in s.entries() {
            atom.add_scaled_into(w, &mut exact);
        }
        let err = (s.iterate()[0] - exact[0]).abs() + (s.iterate()[1] - exact[1]).abs();
        let scale = exact[0].abs() + exact[1].abs();
        assert!(err <= 1e-10 * scale.max(1.0), "drift too large: {err}");
    }

    #[test]
    fn max_score_breaks_ties_by_smallest_id() {
        let mut s = ActiveSet::new(2, 1e-12);
        s.add_weight(&atom(3, vec![1.0, 0.0]), 1.0);
        s.add_weight(&atom(1, vec![0.0, 1.0]), 1.0);
        let (v, score) = s.max_score(&[1.0, 1.0]).unwrap();
        assert_eq!(v.id(), AtomId(1));
        assert_eq!(score, 1.0);
    }

    #[test]
    fn scale_all_clears_on_zero_factor() {
        let mut s = ActiveSet::new(1, 1e-12);
        s.add_weight(&atom(0, vec![2.0]), 1.5);
        s.scale_all(0.0);
        assert!(s.is_empty());
        assert_eq!(s.iterate(), &[0.0]);
    }
}
