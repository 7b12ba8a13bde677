//! Lowest-order least-squares finite elements: Raviart-Thomas fluxes and
//! continuous piecewise-linear potentials with homogeneous Dirichlet data.
//!
//! Unknowns are numbered edges first (one RT0 coefficient per edge, the
//! normal flux across the edge in the direction of [`Edge::normal`]) followed
//! by the interior vertices (nodal values of the potential).
//!
//! [`Edge::normal`]: crate::mesh::Edge::normal

mod assembly;
mod functional;
mod solver;
pub mod sparse;

use thiserror::Error;

use crate::geometry::{dot, Point};
use crate::mesh::{Connectivity, Triangulation};

pub use assembly::{assemble, local_matrix, SparseSystem};
pub use functional::{l2_err_p0, ls_functional, ls_functional_of, project_p0, LsTerms};
pub(crate) use functional::ls_terms_per_leaf;
pub use solver::{solve, solve_cg, solve_with, SolverKind};
pub use sparse::CsrMatrix;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FemError {
    #[error("leaf {0} has non-positive area")]
    DegenerateTriangle(usize),
    #[error("system matrix is not positive definite")]
    NotPositiveDefinite,
    #[error("solver residual {0:e} exceeds the tolerance")]
    Residual(f64),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
}

/// Geometry of one leaf needed for the local basis functions.
#[derive(Debug, Clone, Copy)]
pub struct ElementGeometry {
    pub vertices: [Point; 3],
    pub area: f64,
    pub centroid: Point,
    /// Length of edge `k` (opposite vertex `k`).
    pub lengths: [f64; 3],
    /// Outward unit normal of edge `k`.
    pub normals: [Point; 3],
    /// Gradient of the hat function of vertex `k`.
    pub grad_phi: [Point; 3],
    /// `(1/|T|) int_T |x - c|^2 dx`
    pub second_moment: f64,
}

impl ElementGeometry {
    pub fn new(vertices: [Point; 3]) -> Self {
        let [a, b, c] = vertices;
        let area = 0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]));
        let centroid = [(a[0] + b[0] + c[0]) / 3.0, (a[1] + b[1] + c[1]) / 3.0];
        let mut lengths = [0.0; 3];
        let mut normals = [[0.0; 2]; 3];
        let mut grad_phi = [[0.0; 2]; 3];
        for k in 0..3 {
            let p = vertices[(k + 1) % 3];
            let q = vertices[(k + 2) % 3];
            let d = [q[0] - p[0], q[1] - p[1]];
            let len = d[0].hypot(d[1]);
            lengths[k] = len;
            normals[k] = [d[1] / len, -d[0] / len];
            let s = -len / (2.0 * area);
            grad_phi[k] = [s * normals[k][0], s * normals[k][1]];
        }
        let second_moment = vertices
            .iter()
            .map(|p| (p[0] - centroid[0]).powi(2) + (p[1] - centroid[1]).powi(2))
            .sum::<f64>()
            / 12.0;
        ElementGeometry { vertices, area, centroid, lengths, normals, grad_phi, second_moment }
    }
}

/// Global unknown numbering for the current mesh.
#[derive(Debug, Clone)]
pub struct DofMap {
    pub connectivity: Connectivity,
    /// Global edge unknowns of each leaf, by local edge.
    pub edge_dofs: Vec<[usize; 3]>,
    /// Orientation of the global edge normal relative to the leaf's outward normal.
    pub edge_signs: Vec<[f64; 3]>,
    /// Global vertex unknowns of each leaf, `None` on the boundary.
    pub vertex_dofs: Vec<[Option<usize>; 3]>,
}

impl DofMap {
    pub fn new(mesh: &Triangulation) -> Self {
        let connectivity = mesh.connectivity();
        let vertex_dofs = mesh
            .leaves()
            .iter()
            .map(|&id| mesh.node(id).vertices.map(|v| connectivity.vertex_dof(v)))
            .collect();
        DofMap {
            edge_dofs: connectivity.leaf_edges.clone(),
            edge_signs: connectivity.leaf_signs.clone(),
            vertex_dofs,
            connectivity,
        }
    }

    pub fn ndof(&self) -> usize {
        self.connectivity.ndof()
    }

    pub fn n_edges(&self) -> usize {
        self.connectivity.n_edges()
    }

    /// Local-to-global map of the six local unknowns (three edges, three vertices).
    pub fn local_dofs(&self, leaf: usize) -> [Option<usize>; 6] {
        let e = self.edge_dofs[leaf];
        let v = self.vertex_dofs[leaf];
        [Some(e[0]), Some(e[1]), Some(e[2]), v[0], v[1], v[2]]
    }
}

/// Discrete flux and potential.
#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    /// Edge coefficients followed by interior vertex values.
    pub coeffs: Vec<f64>,
    pub n_edges: usize,
}

impl Solution {
    pub fn zeros(dofs: &DofMap) -> Self {
        Solution { coeffs: vec![0.0; dofs.ndof()], n_edges: dofs.n_edges() }
    }

    pub fn from_coeffs(dofs: &DofMap, coeffs: Vec<f64>) -> Result<Self, FemError> {
        if coeffs.len() != dofs.ndof() {
            return Err(FemError::Dimension { expected: dofs.ndof(), got: coeffs.len() });
        }
        Ok(Solution { coeffs, n_edges: dofs.n_edges() })
    }

    pub fn p_coeffs(&self) -> &[f64] {
        &self.coeffs[..self.n_edges]
    }

    pub fn u_coeffs(&self) -> &[f64] {
        &self.coeffs[self.n_edges..]
    }

    /// Flux and potential gradient restricted to one leaf.
    pub fn local_field(&self, dofs: &DofMap, leaf: usize, geo: &ElementGeometry) -> LocalField {
        let mut alpha = 0.0;
        let mut beta = [0.0, 0.0];
        for k in 0..3 {
            let w = self.coeffs[dofs.edge_dofs[leaf][k]] * dofs.edge_signs[leaf][k] * geo.lengths[k] / (2.0 * geo.area);
            alpha += w;
            beta[0] -= w * geo.vertices[k][0];
            beta[1] -= w * geo.vertices[k][1];
        }
        let mut grad_u = [0.0, 0.0];
        for k in 0..3 {
            if let Some(j) = dofs.vertex_dofs[leaf][k] {
                grad_u[0] += self.coeffs[j] * geo.grad_phi[k][0];
                grad_u[1] += self.coeffs[j] * geo.grad_phi[k][1];
            }
        }
        LocalField { alpha, beta, grad_u }
    }
}

/// `p(x) = alpha x + beta` and the constant `grad u` on one leaf.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LocalField {
    pub alpha: f64,
    pub beta: Point,
    pub grad_u: Point,
}

impl LocalField {
    pub fn flux(&self, x: Point) -> Point {
        [self.alpha * x[0] + self.beta[0], self.alpha * x[1] + self.beta[1]]
    }

    pub fn div_flux(&self) -> f64 {
        2.0 * self.alpha
    }

    /// `p - grad u` at `x`.
    pub fn residual(&self, x: Point) -> Point {
        let p = self.flux(x);
        [p[0] - self.grad_u[0], p[1] - self.grad_u[1]]
    }

    /// `||p - grad u||^2_{L2(T)}`, exact for the affine integrand.
    pub fn residual_norm_sq(&self, geo: &ElementGeometry) -> f64 {
        let r = self.residual(geo.centroid);
        geo.area * (self.alpha * self.alpha * geo.second_moment + dot(r, r))
    }
}

/// Flux value, flux divergence and potential gradient of `solution` on leaf `leaf` at `x`.
pub fn evaluate_fields(mesh: &Triangulation, dofs: &DofMap, solution: &Solution, leaf: usize, x: Point) -> (Point, f64, Point) {
    let geo = ElementGeometry::new(mesh.triangle(mesh.leaves()[leaf]));
    let field = solution.local_field(dofs, leaf, &geo);
    (field.flux(x), field.div_flux(), field.grad_u)
}
