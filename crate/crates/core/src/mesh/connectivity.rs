use rustc_hash::FxHashMap;

use super::{edge_key, Triangulation};
use crate::geometry::{norm, sub, Point};

/// Marker for the missing second neighbour of a boundary edge.
pub const NO_LEAF: usize = usize::MAX;

/// An edge of the current mesh.
///
/// `leaves[0]` is `T+`, the adjacent leaf with the smaller leaf index, and
/// `normal` is its outward unit normal. `leaves[1]` is `T-` or [`NO_LEAF`] on
/// the boundary. The tangent is the normal rotated counterclockwise.
#[derive(Debug, Clone, PartialEq)]
pub struct Edge {
    pub vertices: [u32; 2],
    pub leaves: [usize; 2],
    pub normal: Point,
    pub tangent: Point,
    pub length: f64,
}

impl Edge {
    pub fn is_boundary(&self) -> bool {
        self.leaves[1] == NO_LEAF
    }

    /// Leaves adjacent to the edge (its patch).
    pub fn patch(&self) -> &[usize] {
        if self.is_boundary() {
            &self.leaves[..1]
        } else {
            &self.leaves[..]
        }
    }
}

/// Edge table plus the degree-of-freedom numbering of a conforming mesh.
///
/// Leaf indices refer to positions in [`Triangulation::leaves`]. Edge ids are
/// assigned in order of first appearance when walking the leaves and their
/// local edges, so the numbering is deterministic.
#[derive(Debug, Clone)]
pub struct Connectivity {
    pub edges: Vec<Edge>,
    /// Global edge id of local edge `k` (opposite local vertex `k`).
    pub leaf_edges: Vec<[usize; 3]>,
    /// `+1` where the leaf is `T+` of the edge, `-1` otherwise.
    pub leaf_signs: Vec<[f64; 3]>,
    /// Interior vertex index per vertex id.
    pub interior_index: Vec<Option<usize>>,
    pub n_interior: usize,
}

impl Connectivity {
    pub(super) fn build(mesh: &Triangulation) -> Self {
        let leaves = mesh.leaves();
        let mut lookup: FxHashMap<(u32, u32), usize> = FxHashMap::default();
        lookup.reserve(leaves.len() * 3 / 2 + 8);
        let mut edges: Vec<Edge> = Vec::with_capacity(leaves.len() * 3 / 2 + 8);
        let mut leaf_edges = Vec::with_capacity(leaves.len());
        let mut leaf_signs = Vec::with_capacity(leaves.len());

        for (t, &id) in leaves.iter().enumerate() {
            let node = mesh.node(id);
            let mut ids = [0usize; 3];
            let mut signs = [1.0; 3];
            for k in 0..3 {
                let [a, b] = node.edge(k);
                let key = edge_key(a, b);
                match lookup.get(&key) {
                    Some(&e) => {
                        ids[k] = e;
                        signs[k] = -1.0;
                        edges[e].leaves[1] = t;
                    }
                    None => {
                        let pa = mesh.vertices()[a as usize];
                        let pb = mesh.vertices()[b as usize];
                        let d = sub(pb, pa);
                        let length = norm(d);
                        // Local edge a -> b runs counterclockwise, so (dy, -dx) points outward.
                        let normal = [d[1] / length, -d[0] / length];
                        let e = edges.len();
                        edges.push(Edge {
                            vertices: [a, b],
                            leaves: [t, NO_LEAF],
                            normal,
                            tangent: [-normal[1], normal[0]],
                            length,
                        });
                        lookup.insert(key, e);
                        ids[k] = e;
                    }
                }
            }
            leaf_edges.push(ids);
            leaf_signs.push(signs);
        }

        let mut on_boundary = vec![false; mesh.vertices().len()];
        for e in edges.iter().filter(|e| e.is_boundary()) {
            on_boundary[e.vertices[0] as usize] = true;
            on_boundary[e.vertices[1] as usize] = true;
        }
        let mut interior_index = vec![None; mesh.vertices().len()];
        let mut n_interior = 0;
        for (v, slot) in interior_index.iter_mut().enumerate() {
            if !on_boundary[v] {
                *slot = Some(n_interior);
                n_interior += 1;
            }
        }

        Connectivity { edges, leaf_edges, leaf_signs, interior_index, n_interior }
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    /// RT0 edge unknowns followed by P1 interior-vertex unknowns.
    pub fn ndof(&self) -> usize {
        self.edges.len() + self.n_interior
    }

    /// Global index of the potential unknown at a vertex, if it carries one.
    pub fn vertex_dof(&self, vertex: u32) -> Option<usize> {
        self.interior_index[vertex as usize].map(|i| self.edges.len() + i)
    }

    pub fn patch(&self, edge: usize) -> &[usize] {
        self.edges[edge].patch()
    }
}
