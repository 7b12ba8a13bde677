use rayon::prelude::*;

use super::{DofMap, ElementGeometry, Solution};
use crate::mesh::Triangulation;

/// The two contributions to the least-squares functional.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LsTerms {
    /// `||f + div p||^2`
    pub divergence: f64,
    /// `||p - grad u||^2`
    pub constitutive: f64,
}

impl LsTerms {
    pub fn total(&self) -> f64 {
        self.divergence + self.constitutive
    }
}

/// Per-leaf `(||f + div p||^2_T, ||p - grad u||^2_T)`; with `projected` the
/// data `f` is replaced by its piecewise-constant projection.
pub(crate) fn ls_terms_per_leaf(mesh: &Triangulation, dofs: &DofMap, solution: &Solution, projected: bool) -> Vec<LsTerms> {
    mesh.leaves()
        .par_iter()
        .enumerate()
        .map(|(leaf, &id)| {
            let node = mesh.node(id);
            let geo = ElementGeometry::new(mesh.triangle(id));
            let field = solution.local_field(dofs, leaf, &geo);
            let mean = node.data.integral / node.area;
            let jump = mean + field.div_flux();
            let data_err = if projected { 0.0 } else { node.data.mu_sq };
            LsTerms { divergence: data_err + node.area * jump * jump, constitutive: field.residual_norm_sq(&geo) }
        })
        .collect()
}

fn sum_terms(terms: &[LsTerms]) -> LsTerms {
    terms.iter().fold(LsTerms::default(), |acc, t| LsTerms {
        divergence: acc.divergence + t.divergence,
        constitutive: acc.constitutive + t.constitutive,
    })
}

/// `LS(f; p, u)` with `f` taken from the element data stored on the mesh.
pub fn ls_functional(mesh: &Triangulation, dofs: &DofMap, solution: &Solution) -> LsTerms {
    sum_terms(&ls_terms_per_leaf(mesh, dofs, solution, false))
}

/// `LS(Pi f; p, u)` with the piecewise-constant projection of the data.
pub fn ls_functional_of(mesh: &Triangulation, dofs: &DofMap, solution: &Solution, projected: bool) -> LsTerms {
    sum_terms(&ls_terms_per_leaf(mesh, dofs, solution, projected))
}

/// `(Pi f)|_T` from the element data of node `id`.
pub fn project_p0(mesh: &Triangulation, id: usize) -> f64 {
    let node = mesh.node(id);
    node.data.integral / node.area
}

/// `||(1 - Pi) f||^2_{L2(T)} = int_T f^2 - |T| (Pi f)^2`, clamped at zero.
pub fn l2_err_p0(integral_f: f64, integral_f_sq: f64, area: f64) -> f64 {
    let mean = integral_f / area;
    (integral_f_sq - area * mean * mean).max(0.0)
}
