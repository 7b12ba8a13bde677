use rayon::prelude::*;

use super::{CsrMatrix, DofMap, ElementGeometry, FemError};
use crate::geometry::dot;
use crate::mesh::Triangulation;

/// Normal equations of the least-squares minimization on one mesh.
#[derive(Debug, Clone)]
pub struct SparseSystem {
    pub matrix: CsrMatrix,
    pub rhs: Vec<f64>,
    /// `||f||^2` consistent with the element data used for `rhs`.
    pub f_norm_sq: f64,
}

/// Element matrix of `(div p, div q) + (p - grad u, q - grad v)` in the local
/// ordering (three edge functions, then three hat functions) with the global
/// edge orientations `signs` applied.
pub fn local_matrix(geo: &ElementGeometry, signs: [f64; 3]) -> [[f64; 6]; 6] {
    let mut a = [[0.0; 6]; 6];
    let t = geo.area;
    let c = geo.centroid;
    let off: [[f64; 2]; 3] = std::array::from_fn(|k| [c[0] - geo.vertices[k][0], c[1] - geo.vertices[k][1]]);
    for i in 0..3 {
        for j in 0..3 {
            let lij = geo.lengths[i] * geo.lengths[j];
            let mass = lij / (4.0 * t) * (geo.second_moment + dot(off[i], off[j]));
            a[i][j] = signs[i] * signs[j] * (lij / t + mass);
        }
    }
    for i in 0..3 {
        for j in 0..3 {
            let v = -signs[i] * geo.lengths[i] / 2.0 * dot(off[i], geo.grad_phi[j]);
            a[i][3 + j] = v;
            a[3 + j][i] = v;
            a[3 + i][3 + j] = t * dot(geo.grad_phi[i], geo.grad_phi[j]);
        }
    }
    a
}

/// Local load vector `-(f, div q)` for the three edge functions.
pub(crate) fn local_rhs(geo: &ElementGeometry, signs: [f64; 3], integral_f: f64) -> [f64; 3] {
    std::array::from_fn(|k| -signs[k] * geo.lengths[k] / geo.area * integral_f)
}

/// Assembles the normal equations using the element data stored on the mesh.
pub fn assemble(mesh: &Triangulation, dofs: &DofMap) -> Result<SparseSystem, FemError> {
    let leaves = mesh.leaves();
    let locals: Vec<([[f64; 6]; 6], [f64; 3])> = leaves
        .par_iter()
        .enumerate()
        .map(|(leaf, &id)| {
            let geo = ElementGeometry::new(mesh.triangle(id));
            if !(geo.area > 0.0) {
                return Err(FemError::DegenerateTriangle(leaf));
            }
            let signs = dofs.edge_signs[leaf];
            Ok((local_matrix(&geo, signs), local_rhs(&geo, signs, mesh.node(id).data.integral)))
        })
        .collect::<Result<_, _>>()?;

    let n = dofs.ndof();
    let mut counts = vec![0usize; n];
    for leaf in 0..leaves.len() {
        let ld = dofs.local_dofs(leaf);
        let active = ld.iter().flatten().count();
        for g in ld.iter().flatten() {
            counts[*g] += active;
        }
    }
    let matrix = CsrMatrix::from_row_buckets(n, &counts, |push| {
        for (leaf, (a, _)) in locals.iter().enumerate() {
            let ld = dofs.local_dofs(leaf);
            for i in 0..6 {
                let Some(gi) = ld[i] else { continue };
                for j in 0..6 {
                    if let Some(gj) = ld[j] {
                        push(gi, gj, a[i][j]);
                    }
                }
            }
        }
    });

    let mut rhs = vec![0.0; n];
    let mut f_norm_sq = 0.0;
    for (leaf, (_, b)) in locals.iter().enumerate() {
        for k in 0..3 {
            rhs[dofs.edge_dofs[leaf][k]] += b[k];
        }
        let node = mesh.node(leaves[leaf]);
        f_norm_sq += node.data.mu_sq + node.data.integral * node.data.integral / node.area;
    }
    Ok(SparseSystem { matrix, rhs, f_norm_sq })
}
