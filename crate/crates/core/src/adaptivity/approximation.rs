//! Thresholding data approximation on the refinement forest.
//!
//! The working partition starts at the roots. Marking a node either descends
//! into children that already exist in the forest or bisects a current leaf,
//! so the final leaves are automatically the overlay of the approximation
//! partition and the mesh that was there before. Hanging vertices are allowed
//! until the loop ends; a single completion pass then restores conformity.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use ordered_float::OrderedFloat;

use super::AdaptivityError;
use crate::mesh::Triangulation;

/// Reference value for the marking threshold `varrho * max`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AaThreshold {
    /// `varrho * max_T mu(T) <= mu_tilde(K)`
    #[default]
    MuMax,
    /// `varrho * max_T mu_tilde(T) <= mu_tilde(K)`
    MuTildeMax,
}

/// Counters of one approximation run.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct AaStats {
    pub sweeps: usize,
    /// Sweeps in which the threshold marked nothing and the largest `mu_tilde` was split.
    pub forced: usize,
    /// Size of the approximation partition before completion.
    pub partition_size: usize,
    /// `mu` of the approximation partition on exit.
    pub mu: f64,
}

type Entry = (OrderedFloat<f64>, Reverse<usize>);

/// Refines `mesh` until `mu(leaves) <= tol`.
///
/// Fails once the working partition grows beyond `max_leaves` elements.
pub fn approximation_algorithm(
    mesh: &mut Triangulation,
    tol: f64,
    varrho: f64,
    threshold: AaThreshold,
    max_leaves: usize,
) -> Result<AaStats, AdaptivityError> {
    let mut stats = AaStats::default();
    let mut part = Partition::default();
    for &r in mesh.roots() {
        part.insert(mesh, r);
    }
    let tol_sq = tol * tol;
    let mut ops_since_exact = 0usize;
    loop {
        if part.sum_sq <= tol_sq || ops_since_exact > part.len() {
            part.resum(mesh);
            ops_since_exact = 0;
            if part.sum_sq <= tol_sq {
                break;
            }
        }
        stats.sweeps += 1;

        let reference = match threshold {
            AaThreshold::MuMax => part.max_mu(),
            AaThreshold::MuTildeMax => part.max_mu_tilde(),
        };
        let bound = varrho * reference;
        let mut marked = Vec::new();
        while let Some(id) = part.pop_mu_tilde_at_least(bound) {
            marked.push(id);
        }
        if marked.is_empty() {
            match part.pop_mu_tilde_at_least(f64::NEG_INFINITY) {
                Some(id) => {
                    marked.push(id);
                    stats.forced += 1;
                }
                None => break,
            }
        }

        for id in marked {
            let children = match mesh.node(id).children {
                Some(c) => c,
                None => mesh.bisect_raw(id)?,
            };
            part.remove(mesh, id);
            for c in children {
                part.insert(mesh, c);
            }
            ops_since_exact += 1;
        }
        if part.len() > max_leaves {
            return Err(AdaptivityError::Budget { leaves: part.len(), limit: max_leaves });
        }
    }
    stats.partition_size = part.len();
    stats.mu = part.sum_sq.max(0.0).sqrt();
    mesh.complete();
    Ok(stats)
}

/// Working partition with lazily cleaned max-heaps over `mu` and `mu_tilde`.
#[derive(Default)]
struct Partition {
    members: Vec<usize>,
    /// Position in `members` per node id, `usize::MAX` when absent.
    position: Vec<usize>,
    by_mu: BinaryHeap<Entry>,
    by_tilde: BinaryHeap<Entry>,
    sum_sq: f64,
}

impl Partition {
    fn len(&self) -> usize {
        self.members.len()
    }

    fn contains(&self, id: usize) -> bool {
        self.position.get(id).is_some_and(|&p| p != usize::MAX)
    }

    fn insert(&mut self, mesh: &Triangulation, id: usize) {
        if self.position.len() <= id {
            self.position.resize(mesh.nodes().len().max(id + 1), usize::MAX);
        }
        self.position[id] = self.members.len();
        self.members.push(id);
        let node = mesh.node(id);
        self.by_mu.push((OrderedFloat(node.mu()), Reverse(id)));
        self.by_tilde.push((OrderedFloat(node.mu_tilde), Reverse(id)));
        self.sum_sq += node.data.mu_sq;
    }

    /// Removes `id`; its heap entries become stale and are skipped later.
    fn remove(&mut self, mesh: &Triangulation, id: usize) {
        let p = self.position[id];
        if p == usize::MAX {
            return;
        }
        self.members.swap_remove(p);
        if let Some(&moved) = self.members.get(p) {
            self.position[moved] = p;
        }
        self.position[id] = usize::MAX;
        self.sum_sq -= mesh.node(id).data.mu_sq;
    }

    fn resum(&mut self, mesh: &Triangulation) {
        let mut ids = self.members.clone();
        ids.sort_unstable();
        self.sum_sq = ids.iter().map(|&id| mesh.node(id).data.mu_sq).sum();
    }

    fn max_mu(&mut self) -> f64 {
        while let Some(&(v, Reverse(id))) = self.by_mu.peek() {
            if self.contains(id) {
                return v.0;
            }
            self.by_mu.pop();
        }
        0.0
    }

    fn max_mu_tilde(&mut self) -> f64 {
        while let Some(&(v, Reverse(id))) = self.by_tilde.peek() {
            if self.contains(id) {
                return v.0;
            }
            self.by_tilde.pop();
        }
        0.0
    }

    /// Pops the member with the largest `mu_tilde` if it is at least `bound`.
    fn pop_mu_tilde_at_least(&mut self, bound: f64) -> Option<usize> {
        let top = self.max_mu_tilde();
        if self.by_tilde.is_empty() || top < bound {
            return None;
        }
        self.by_tilde.pop().map(|(_, Reverse(id))| id)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::benchmarks::Problem;
    use crate::mesh::RefineMode;

    #[test]
    fn satisfied_tolerance_changes_nothing() {
        let mut m = Problem::microstructure(0.1).unwrap().initial_mesh();
        let before = m.n_leaves();
        let mu = m.mu_sq_total().sqrt();
        let stats = approximation_algorithm(&mut m, mu, 1.0 - 1e-6, AaThreshold::MuMax, 1000).unwrap();
        assert_eq!(m.n_leaves(), before);
        assert_eq!(stats.sweeps, 0);
    }

    #[test]
    fn reaches_the_tolerance_and_stays_conforming() {
        let p = Problem::microstructure(3f64.powi(-3)).unwrap();
        for threshold in [AaThreshold::MuMax, AaThreshold::MuTildeMax] {
            let mut m = p.initial_mesh();
            let mut tol = m.mu_sq_total().sqrt();
            for _ in 0..15 {
                tol *= 0.7;
                approximation_algorithm(&mut m, tol, 1.0 - 1e-6, threshold, 1_000_000).unwrap();
                assert!(m.mu_sq_total().sqrt() <= tol * (1.0 + 1e-12));
                let c = m.connectivity();
                // Conforming: every edge has one or two leaves and the Euler formula holds.
                let v = m.leaves().iter().flat_map(|&id| m.node(id).vertices).collect::<std::collections::BTreeSet<_>>().len();
                assert_eq!(v + m.n_leaves(), c.n_edges() + 1);
            }
        }
    }

    #[test]
    fn result_refines_the_previous_mesh() {
        let p = Problem::microstructure(0.2).unwrap();
        let mut m = p.initial_mesh();
        let all = m.leaves().to_vec();
        m.refine(&all, RefineMode::Bisec3).unwrap();
        let before: std::collections::HashSet<usize> = m.leaves().iter().copied().collect();
        let tol = 0.3 * m.mu_sq_total().sqrt();
        approximation_algorithm(&mut m, tol, 1.0 - 1e-6, AaThreshold::MuMax, 100_000).unwrap();
        assert!(m.mu_sq_total().sqrt() <= tol);
        for &id in m.leaves() {
            let mut n = Some(id);
            while let Some(k) = n {
                if before.contains(&k) {
                    break;
                }
                n = m.node(k).parent;
            }
            assert!(n.is_some(), "leaf {id} is not inside a previous leaf");
        }
    }

    #[test]
    fn budget_is_enforced() {
        let mut m = Problem::microstructure(3f64.powi(-3)).unwrap().initial_mesh();
        let err = approximation_algorithm(&mut m, 0.0, 1.0 - 1e-6, AaThreshold::MuMax, 500).unwrap_err();
        assert!(matches!(err, AdaptivityError::Budget { .. }));
    }
}
