use faer::prelude::Solve;
use faer::sparse::{SparseColMat, Triplet};
use faer::{Mat, Side};

use super::{CsrMatrix, FemError, SparseSystem};

/// Relative residual every solve must reach.
pub const RESIDUAL_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SolverKind {
    /// Sparse Cholesky with a fill-reducing ordering.
    #[default]
    Cholesky,
    /// Jacobi-preconditioned conjugate gradients.
    ConjugateGradient,
}

pub fn solve(system: &SparseSystem) -> Result<Vec<f64>, FemError> {
    solve_with(system, SolverKind::Cholesky)
}

pub fn solve_with(system: &SparseSystem, kind: SolverKind) -> Result<Vec<f64>, FemError> {
    let b = &system.rhs;
    let b_norm = norm2(b);
    if b_norm == 0.0 {
        return Ok(vec![0.0; b.len()]);
    }
    let x = match kind {
        SolverKind::Cholesky => cholesky(&system.matrix, b)?,
        SolverKind::ConjugateGradient => solve_cg(&system.matrix, b, 1e-12, 20 * b.len() + 100)?,
    };
    let res = relative_residual(&system.matrix, &x, b);
    if res > RESIDUAL_TOL {
        return Err(FemError::Residual(res));
    }
    Ok(x)
}

fn cholesky(a: &CsrMatrix, b: &[f64]) -> Result<Vec<f64>, FemError> {
    let n = a.n;
    let mut triplets = Vec::with_capacity(a.nnz() / 2 + n);
    for row in 0..n {
        for k in a.row_ptr[row]..a.row_ptr[row + 1] {
            let col = a.col_idx[k];
            if col <= row {
                triplets.push(Triplet::new(row, col, a.values[k]));
            }
        }
    }
    let lower = SparseColMat::<usize, f64>::try_new_from_triplets(n, n, &triplets).map_err(|_| FemError::NotPositiveDefinite)?;
    let llt = lower.sp_cholesky(Side::Lower).map_err(|_| FemError::NotPositiveDefinite)?;
    let rhs = Mat::<f64>::from_fn(n, 1, |i, _| b[i]);
    let sol = llt.solve(&rhs);
    let mut x: Vec<f64> = (0..n).map(|i| sol[(i, 0)]).collect();

    // A few steps of iterative refinement absorb round-off on badly scaled meshes.
    for _ in 0..3 {
        let ax = a.matvec(&x);
        let r: Vec<f64> = b.iter().zip(&ax).map(|(b, ax)| b - ax).collect();
        if norm2(&r) <= 1e-3 * RESIDUAL_TOL * norm2(b) {
            break;
        }
        let rr = Mat::<f64>::from_fn(n, 1, |i, _| r[i]);
        let d = llt.solve(&rr);
        for (i, xi) in x.iter_mut().enumerate() {
            *xi += d[(i, 0)];
        }
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(FemError::NotPositiveDefinite);
    }
    Ok(x)
}

/// Jacobi-preconditioned conjugate gradients stopped at `||r|| <= tol ||b||`.
pub fn solve_cg(a: &CsrMatrix, b: &[f64], tol: f64, max_iter: usize) -> Result<Vec<f64>, FemError> {
    let n = a.n;
    let diag = a.diagonal();
    if diag.iter().any(|&d| !(d > 0.0)) {
        return Err(FemError::NotPositiveDefinite);
    }
    let b_norm = norm2(b);
    let mut x = vec![0.0; n];
    let mut r = b.to_vec();
    let mut z: Vec<f64> = r.iter().zip(&diag).map(|(r, d)| r / d).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; n];
    for _ in 0..max_iter {
        if norm2(&r) <= tol * b_norm {
            return Ok(x);
        }
        a.matvec_into(&p, &mut ap);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            return Err(FemError::NotPositiveDefinite);
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        for i in 0..n {
            z[i] = r[i] / diag[i];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Err(FemError::Residual(norm2(&r) / b_norm))
}

pub(crate) fn relative_residual(a: &CsrMatrix, x: &[f64], b: &[f64]) -> f64 {
    let ax = a.matvec(x);
    let r: f64 = b.iter().zip(&ax).map(|(b, ax)| (b - ax) * (b - ax)).sum::<f64>().sqrt();
    let bn = norm2(b);
    if bn == 0.0 {
        r
    } else {
        r / bn
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}
