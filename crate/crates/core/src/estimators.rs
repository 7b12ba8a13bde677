//! A posteriori error indicators per leaf, all stored squared.
//!
//! * `NAT`: `||f + div p||^2_T + ||p - grad u||^2_T`, the functional itself.
//! * `SEP`: residual-type terms of the constitutive residual `w = p - grad u`:
//!   `|T| ||div w||^2_T + |T| ||curl w||^2_T` plus `|T|^{1/2}` times the
//!   squared normal jumps over interior edges and tangential jumps over all
//!   edges of `T`. On boundary edges the jump is the trace.
//! * `COL`: `SEP + |T| ||(1 - Pi) f||^2_T`.
//! * `OSC`: `|T| ||(1 - Pi) f||^2_T`.
//! * `MU`: `||(1 - Pi) f||^2_T`.

use rayon::prelude::*;

use crate::fem::{ls_terms_per_leaf, DofMap, ElementGeometry, LocalField, Solution};
use crate::geometry::{dot, Point};
use crate::mesh::Triangulation;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EstimatorKind {
    Nat,
    Sep,
    Col,
    Osc,
    Mu,
}

/// Squared indicators indexed by leaf position in [`Triangulation::leaves`].
#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorReport {
    pub kind: EstimatorKind,
    pub per_triangle: Vec<f64>,
    pub total_sq: f64,
}

impl EstimatorReport {
    pub fn new(kind: EstimatorKind, per_triangle: Vec<f64>) -> Self {
        let total_sq = per_triangle.iter().sum();
        EstimatorReport { kind, per_triangle, total_sq }
    }

    /// `eta = sqrt(sum_T eta_T^2)`
    pub fn total(&self) -> f64 {
        self.total_sq.sqrt()
    }
}

/// Individual contributions to the separated indicator of one leaf.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SepParts {
    pub divergence: f64,
    pub curl: f64,
    pub normal_jumps: f64,
    pub tangential_jumps: f64,
}

impl SepParts {
    pub fn total(&self) -> f64 {
        self.divergence + self.curl + self.normal_jumps + self.tangential_jumps
    }
}

pub fn eta_nat(mesh: &Triangulation, dofs: &DofMap, solution: &Solution) -> EstimatorReport {
    let terms = ls_terms_per_leaf(mesh, dofs, solution, false);
    EstimatorReport::new(EstimatorKind::Nat, terms.iter().map(|t| t.total()).collect())
}

pub fn eta_sep(mesh: &Triangulation, dofs: &DofMap, solution: &Solution) -> EstimatorReport {
    let parts = eta_sep_parts(mesh, dofs, solution);
    EstimatorReport::new(EstimatorKind::Sep, parts.iter().map(SepParts::total).collect())
}

pub fn eta_col(mesh: &Triangulation, dofs: &DofMap, solution: &Solution) -> EstimatorReport {
    let sep = eta_sep(mesh, dofs, solution);
    let osc = osc(mesh);
    combine_col(&sep, &osc)
}

/// `COL` from already computed `SEP` and `OSC` reports.
pub fn combine_col(sep: &EstimatorReport, osc: &EstimatorReport) -> EstimatorReport {
    let values = sep.per_triangle.iter().zip(&osc.per_triangle).map(|(s, o)| s + o).collect();
    EstimatorReport::new(EstimatorKind::Col, values)
}

pub fn osc(mesh: &Triangulation) -> EstimatorReport {
    let values = mesh.leaves().iter().map(|&id| mesh.node(id).area * mesh.node(id).data.mu_sq).collect();
    EstimatorReport::new(EstimatorKind::Osc, values)
}

pub fn mu(mesh: &Triangulation) -> EstimatorReport {
    let values = mesh.leaves().iter().map(|&id| mesh.node(id).data.mu_sq).collect();
    EstimatorReport::new(EstimatorKind::Mu, values)
}

/// Two-point Gauss nodes on `[0, 1]`.
const EDGE_GAUSS: [f64; 2] = [0.211_324_865_405_187_1, 0.788_675_134_594_812_9];

/// Jump integrals `(int_E [w . nu]^2, int_E [w . tau]^2)` for every edge.
fn edge_jumps(mesh: &Triangulation, dofs: &DofMap, fields: &[LocalField]) -> Vec<(f64, f64)> {
    dofs.connectivity
        .edges
        .par_iter()
        .map(|e| {
            let a = mesh.vertices()[e.vertices[0] as usize];
            let b = mesh.vertices()[e.vertices[1] as usize];
            let (mut n2, mut t2) = (0.0, 0.0);
            for s in EDGE_GAUSS {
                let x: Point = [a[0] + s * (b[0] - a[0]), a[1] + s * (b[1] - a[1])];
                let mut jump = fields[e.leaves[0]].residual(x);
                if !e.is_boundary() {
                    let other = fields[e.leaves[1]].residual(x);
                    jump = [jump[0] - other[0], jump[1] - other[1]];
                }
                n2 += 0.5 * dot(jump, e.normal).powi(2);
                t2 += 0.5 * dot(jump, e.tangent).powi(2);
            }
            let normal = if e.is_boundary() { 0.0 } else { e.length * n2 };
            (normal, e.length * t2)
        })
        .collect()
}

pub fn eta_sep_parts(mesh: &Triangulation, dofs: &DofMap, solution: &Solution) -> Vec<SepParts> {
    let geos: Vec<ElementGeometry> = mesh.leaves().par_iter().map(|&id| ElementGeometry::new(mesh.triangle(id))).collect();
    let fields: Vec<LocalField> = geos.par_iter().enumerate().map(|(leaf, g)| solution.local_field(dofs, leaf, g)).collect();
    let jumps = edge_jumps(mesh, dofs, &fields);
    geos.par_iter()
        .zip(fields.par_iter())
        .enumerate()
        .map(|(leaf, (g, f))| {
            let area = g.area;
            // w = alpha x + beta - grad u has Jacobian alpha I.
            let div = f.div_flux();
            let curl = f.alpha - f.alpha;
            let (mut normal, mut tangential) = (0.0, 0.0);
            for &e in &dofs.edge_dofs[leaf] {
                normal += jumps[e].0;
                tangential += jumps[e].1;
            }
            SepParts {
                divergence: area * area * div * div,
                curl: area * area * curl * curl,
                normal_jumps: area.sqrt() * normal,
                tangential_jumps: area.sqrt() * tangential,
            }
        })
        .collect()
}
