//! Triangulations as a refinement-history forest with newest-vertex bisection.
//!
//! Every triangle ever created lives in an arena of [`TriangleNode`]s. The
//! initial triangles are the roots, and the leaves form the current mesh.
//! Each node stores its vertices as `(z0, z1, z2)` with `z0` the newest
//! vertex; the refinement edge is `conv{z1, z2}`. Bisection inserts the
//! midpoint `m` of the refinement edge and creates the children
//! `(m, z0, z1)` and `(m, z2, z0)`, both counterclockwise when the parent is.
//!
//! Bisection alone may leave hanging vertices. [`Triangulation::complete`]
//! removes them by bisecting every leaf that has an already-split edge until
//! none is left, which yields the smallest conforming refinement.

mod connectivity;
mod io;

use std::collections::VecDeque;
use std::sync::Arc;

use rustc_hash::FxHashMap;
use thiserror::Error;

use crate::geometry::{midpoint, norm, sub, triangle_signed_area, Point};

pub use connectivity::{Connectivity, Edge, NO_LEAF};
pub use io::{read_mesh_dump, MeshDump};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MeshError {
    #[error("node {0} is not a leaf")]
    NotALeaf(usize),
    #[error("node {0} does not exist")]
    UnknownNode(usize),
    #[error("triangle {0} is degenerate or clockwise")]
    BadTriangle(usize),
    #[error("vertex index {0} out of range")]
    BadVertex(u32),
    #[error("malformed mesh dump at line {line}: {reason}")]
    Parse { line: usize, reason: String },
}

/// Per-element right-hand-side data carried by every node.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ElementData {
    /// `int_T f dx`
    pub integral: f64,
    /// `||(1 - Pi) f||^2_{L2(T)}`, the squared data error of the element.
    pub mu_sq: f64,
}

/// Supplies [`ElementData`] for freshly created triangles.
pub trait ElementSource: Send + Sync {
    fn element_data(&self, tri: &[Point; 3]) -> ElementData;
}

/// Which initial triangulation to start from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Domain {
    /// `(-1, 1)^2 \ [0, 1)^2`
    LShape,
    /// `(0, 1)^2`
    UnitSquare,
}

/// How a marked triangle is refined before the completion step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RefineMode {
    /// Bisect the refinement edge only.
    RefinementEdge,
    /// Bisect all three edges (the parent is split into four).
    Bisec3,
}

#[derive(Debug, Clone)]
pub struct TriangleNode {
    /// `(z0, z1, z2)`, newest vertex first.
    pub vertices: [u32; 3],
    pub parent: Option<usize>,
    pub children: Option<[usize; 2]>,
    pub generation: u32,
    pub area: f64,
    pub data: ElementData,
    /// Modified data indicator used by the approximation algorithm.
    pub mu_tilde: f64,
}

impl TriangleNode {
    pub fn is_leaf(&self) -> bool {
        self.children.is_none()
    }

    pub fn mu(&self) -> f64 {
        self.data.mu_sq.sqrt()
    }

    /// Edge `k` is opposite local vertex `k`; edge 0 is the refinement edge.
    pub fn edge(&self, k: usize) -> [u32; 2] {
        [self.vertices[(k + 1) % 3], self.vertices[(k + 2) % 3]]
    }
}

#[inline]
pub(crate) fn edge_key(a: u32, b: u32) -> (u32, u32) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

#[derive(Clone)]
pub struct Triangulation {
    vertices: Vec<Point>,
    nodes: Vec<TriangleNode>,
    roots: Vec<usize>,
    leaves: Vec<usize>,
    /// Bisected edge -> midpoint vertex.
    midpoints: FxHashMap<(u32, u32), u32>,
    /// Unsplit edge -> leaves that contain it as a full edge.
    edge_leaves: FxHashMap<(u32, u32), [u32; 2]>,
    source: Option<Arc<dyn ElementSource>>,
}

impl std::fmt::Debug for Triangulation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Triangulation")
            .field("vertices", &self.vertices.len())
            .field("nodes", &self.nodes.len())
            .field("leaves", &self.leaves.len())
            .finish()
    }
}

impl Triangulation {
    /// Initial triangulation of a benchmark domain built from right-isosceles
    /// triangles whose refinement edge is the hypotenuse.
    pub fn initial(domain: Domain) -> Self {
        let (vertices, triangles): (Vec<Point>, Vec<[u32; 3]>) = match domain {
            Domain::LShape => (
                vec![
                    [-1.0, -1.0],
                    [0.0, -1.0],
                    [1.0, -1.0],
                    [-1.0, 0.0],
                    [0.0, 0.0],
                    [1.0, 0.0],
                    [-1.0, 1.0],
                    [0.0, 1.0],
                ],
                // Hypotenuses 0-4, 4-2 and 4-6 all run through the reentrant corner.
                vec![[1, 4, 0], [3, 0, 4], [1, 2, 4], [5, 4, 2], [3, 4, 6], [7, 6, 4]],
            ),
            Domain::UnitSquare => (
                vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0], [0.5, 0.5]],
                vec![[4, 0, 1], [4, 1, 2], [4, 2, 3], [4, 3, 0]],
            ),
        };
        Self::from_triangles(vertices, &triangles).expect("built-in initial meshes are valid")
    }

    /// Builds a forest whose roots are the given counterclockwise triangles,
    /// each listed newest vertex first.
    pub fn from_triangles(vertices: Vec<Point>, triangles: &[[u32; 3]]) -> Result<Self, MeshError> {
        let mut mesh = Triangulation {
            vertices,
            nodes: Vec::with_capacity(triangles.len()),
            roots: Vec::new(),
            leaves: Vec::new(),
            midpoints: FxHashMap::default(),
            edge_leaves: FxHashMap::default(),
            source: None,
        };
        for (i, tri) in triangles.iter().enumerate() {
            if let Some(&bad) = tri.iter().find(|&&v| v as usize >= mesh.vertices.len()) {
                return Err(MeshError::BadVertex(bad));
            }
            let p = tri.map(|v| mesh.vertices[v as usize]);
            let area = triangle_signed_area(p[0], p[1], p[2]);
            if !(area > 0.0) {
                return Err(MeshError::BadTriangle(i));
            }
            let id = mesh.push_node(*tri, None, 0);
            mesh.roots.push(id);
        }
        for &r in &mesh.roots.clone() {
            mesh.nodes[r].mu_tilde = mesh.nodes[r].mu();
        }
        mesh.rebuild_leaves();
        Ok(mesh)
    }

    /// Attaches right-hand-side data and recomputes the payload of every node.
    pub fn with_source(mut self, source: Arc<dyn ElementSource>) -> Self {
        self.source = Some(source);
        for id in 0..self.nodes.len() {
            let tri = self.triangle(id);
            self.nodes[id].data = self.source.as_ref().unwrap().element_data(&tri);
        }
        for id in 0..self.nodes.len() {
            if self.nodes[id].parent.is_none() {
                self.nodes[id].mu_tilde = self.nodes[id].mu();
            }
            if let Some([c1, c2]) = self.nodes[id].children {
                self.assign_child_mu_tilde(id, c1, c2);
            }
        }
        self
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn nodes(&self) -> &[TriangleNode] {
        &self.nodes
    }

    pub fn node(&self, id: usize) -> &TriangleNode {
        &self.nodes[id]
    }

    pub fn roots(&self) -> &[usize] {
        &self.roots
    }

    /// Node ids of the current mesh, ascending.
    pub fn leaves(&self) -> &[usize] {
        &self.leaves
    }

    pub fn n_leaves(&self) -> usize {
        self.leaves.len()
    }

    pub fn triangle(&self, id: usize) -> [Point; 3] {
        self.nodes[id].vertices.map(|v| self.vertices[v as usize])
    }

    /// Squared data error `mu^2` summed over the leaves, in leaf order.
    pub fn mu_sq_total(&self) -> f64 {
        self.leaves.iter().map(|&id| self.nodes[id].data.mu_sq).sum()
    }

    fn push_node(&mut self, vertices: [u32; 3], parent: Option<usize>, generation: u32) -> usize {
        let p = vertices.map(|v| self.vertices[v as usize]);
        let area = triangle_signed_area(p[0], p[1], p[2]);
        let data = self.source.as_ref().map(|s| s.element_data(&p)).unwrap_or_default();
        let id = self.nodes.len();
        self.nodes.push(TriangleNode {
            vertices,
            parent,
            children: None,
            generation,
            area,
            data,
            mu_tilde: 0.0,
        });
        for k in 0..3 {
            let [a, b] = self.nodes[id].edge(k);
            let slot = self.edge_leaves.entry(edge_key(a, b)).or_insert([u32::MAX; 2]);
            if slot[0] == u32::MAX {
                slot[0] = id as u32;
            } else {
                slot[1] = id as u32;
            }
        }
        id
    }

    fn detach_leaf_edges(&mut self, id: usize) {
        for k in 0..3 {
            let [a, b] = self.nodes[id].edge(k);
            let key = edge_key(a, b);
            if let Some(slot) = self.edge_leaves.get_mut(&key) {
                if slot[0] == id as u32 {
                    slot[0] = slot[1];
                    slot[1] = u32::MAX;
                } else if slot[1] == id as u32 {
                    slot[1] = u32::MAX;
                }
                if slot[0] == u32::MAX {
                    self.edge_leaves.remove(&key);
                }
            }
        }
    }

    fn assign_child_mu_tilde(&mut self, parent: usize, c1: usize, c2: usize) {
        let p = &self.nodes[parent];
        let denom = p.mu() + p.mu_tilde;
        let value = if denom > 0.0 {
            (self.nodes[c1].mu() + self.nodes[c2].mu()) * p.mu_tilde / denom
        } else {
            0.0
        };
        self.nodes[c1].mu_tilde = value;
        self.nodes[c2].mu_tilde = value;
    }

    /// Bisects a leaf without restoring conformity or updating the leaf list.
    pub(crate) fn bisect_raw(&mut self, id: usize) -> Result<[usize; 2], MeshError> {
        let node = self.nodes.get(id).ok_or(MeshError::UnknownNode(id))?;
        if !node.is_leaf() {
            return Err(MeshError::NotALeaf(id));
        }
        let [z0, z1, z2] = node.vertices;
        let generation = node.generation + 1;
        let key = edge_key(z1, z2);
        let m = match self.midpoints.get(&key) {
            Some(&m) => m,
            None => {
                let m = self.vertices.len() as u32;
                self.vertices.push(midpoint(self.vertices[z1 as usize], self.vertices[z2 as usize]));
                self.midpoints.insert(key, m);
                m
            }
        };
        self.detach_leaf_edges(id);
        let c1 = self.push_node([m, z0, z1], Some(id), generation);
        let c2 = self.push_node([m, z2, z0], Some(id), generation);
        self.nodes[id].children = Some([c1, c2]);
        self.assign_child_mu_tilde(id, c1, c2);
        Ok([c1, c2])
    }

    /// Leaf sharing the full edge `(a, b)` with `id`, if any.
    fn neighbour_across(&self, id: usize, a: u32, b: u32) -> Option<usize> {
        self.edge_leaves.get(&edge_key(a, b)).and_then(|slot| {
            slot.iter().copied().find(|&n| n != u32::MAX && n as usize != id).map(|n| n as usize)
        })
    }

    fn has_hanging_vertex(&self, id: usize) -> bool {
        let node = &self.nodes[id];
        (0..3).any(|k| {
            let [a, b] = node.edge(k);
            self.midpoints.contains_key(&edge_key(a, b))
        })
    }

    /// Bisects a single leaf (newest-vertex bisection of its refinement edge).
    /// The result is generally not conforming; call [`Self::complete`] for that.
    pub fn bisect(&mut self, id: usize) -> Result<(usize, usize), MeshError> {
        let [c1, c2] = self.bisect_raw(id)?;
        self.rebuild_leaves();
        Ok((c1, c2))
    }

    /// Refines the marked leaves and closes the mesh to a conforming one.
    pub fn refine(&mut self, marked: &[usize], mode: RefineMode) -> Result<(), MeshError> {
        let mut marked = marked.to_vec();
        marked.sort_unstable();
        marked.dedup();
        for &id in &marked {
            if id >= self.nodes.len() {
                return Err(MeshError::UnknownNode(id));
            }
            if !self.nodes[id].is_leaf() {
                return Err(MeshError::NotALeaf(id));
            }
        }
        if marked.is_empty() {
            return Ok(());
        }
        for &id in &marked {
            let [c1, c2] = self.bisect_raw(id)?;
            if mode == RefineMode::Bisec3 {
                self.bisect_raw(c1)?;
                self.bisect_raw(c2)?;
            }
        }
        self.complete();
        Ok(())
    }

    /// Removes all hanging vertices by further bisections (NVB completion).
    pub fn complete(&mut self) {
        let mut queue: VecDeque<usize> =
            self.nodes.iter().enumerate().filter(|(_, n)| n.is_leaf()).map(|(i, _)| i).collect();
        while let Some(id) = queue.pop_front() {
            if !self.nodes[id].is_leaf() || !self.has_hanging_vertex(id) {
                continue;
            }
            let [_, z1, z2] = self.nodes[id].vertices;
            let neighbour = self.neighbour_across(id, z1, z2);
            let [c1, c2] = self.bisect_raw(id).expect("queued node is a leaf");
            queue.push_back(c1);
            queue.push_back(c2);
            if let Some(n) = neighbour {
                queue.push_back(n);
            }
        }
        self.rebuild_leaves();
    }

    pub(crate) fn rebuild_leaves(&mut self) {
        self.leaves = self.nodes.iter().enumerate().filter(|(_, n)| n.is_leaf()).map(|(i, _)| i).collect();
    }

    /// Edge table and degree-of-freedom numbering of the current (conforming) mesh.
    pub fn connectivity(&self) -> Connectivity {
        Connectivity::build(self)
    }

    /// `#edges + #interior vertices`
    pub fn ndof(&self) -> usize {
        self.connectivity().ndof()
    }

    /// Smallest interior angle (radians) over all leaves.
    pub fn min_angle(&self) -> f64 {
        self.leaves
            .iter()
            .map(|&id| {
                let p = self.triangle(id);
                (0..3)
                    .map(|k| {
                        let u = sub(p[(k + 1) % 3], p[k]);
                        let v = sub(p[(k + 2) % 3], p[k]);
                        (crate::geometry::dot(u, v) / (norm(u) * norm(v))).clamp(-1.0, 1.0).acos()
                    })
                    .fold(f64::INFINITY, f64::min)
            })
            .fold(f64::INFINITY, f64::min)
    }

    /// Sum of leaf areas.
    pub fn total_area(&self) -> f64 {
        self.leaves.iter().map(|&id| self.nodes[id].area).sum()
    }
}
