//! Gaussian quadrature on `[0, 1]` and conical product rules on triangles.
//!
//! One-dimensional Gauss-Legendre and Gauss-Jacobi rules (weight `1 - x`)
//! come from the Golub-Welsch algorithm: the nodes are the eigenvalues of the
//! symmetric tridiagonal Jacobi matrix of the three-term recurrence and the
//! weights are `mu0` times the squared first eigenvector components. The
//! Duffy-type map `(y1, y2) -> (y1, (1 - y1) y2)` turns the tensor rule on the
//! unit square into a rule on the reference triangle
//! `conv{(0,0), (1,0), (0,1)}` with `k^2` points. It is exact whenever the
//! pulled-back integrand (times the Jacobian `1 - y1`) has partial degree at
//! most `2k - 1` on the square, which covers all polynomials of total degree
//! `<= 2k - 1` on the triangle.

use std::sync::OnceLock;

use thiserror::Error;

use crate::geometry::{triangle_signed_area, Point};

/// Largest number of points per direction served by [`cached_rule`].
pub const MAX_CACHED_K: usize = 20;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QuadratureError {
    #[error("quadrature needs at least one point per direction (got {0})")]
    InvalidCount(usize),
    #[error("tridiagonal eigenvalue iteration did not converge for k = {0}")]
    NoConvergence(usize),
}

/// Nodes and weights of a one-dimensional rule.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussRule1d {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

/// Golub-Welsch: Gauss rule for the measure with recurrence diagonal `diag`
/// (`a_0..a_{k-1}`), squared off-diagonal `offdiag_sq` (`b_1..b_{k-1}`) and
/// total mass `mu0`. Nodes come out sorted ascending.
pub fn golub_welsch(diag: &[f64], offdiag_sq: &[f64], mu0: f64) -> Result<GaussRule1d, QuadratureError> {
    let k = diag.len();
    if k == 0 {
        return Err(QuadratureError::InvalidCount(0));
    }
    assert_eq!(offdiag_sq.len(), k - 1, "off-diagonal length must be k - 1");
    let mut d = diag.to_vec();
    let mut e: Vec<f64> = offdiag_sq.iter().map(|b| b.sqrt()).chain(std::iter::once(0.0)).collect();
    // Only the first row of the eigenvector matrix is needed for the weights.
    let mut z = vec![0.0; k];
    z[0] = 1.0;
    tridiagonal_ql(&mut d, &mut e, &mut z).ok_or(QuadratureError::NoConvergence(k))?;

    let mut pairs: Vec<(f64, f64)> = d.into_iter().zip(z.into_iter().map(|v| mu0 * v * v)).collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let (nodes, weights) = pairs.into_iter().unzip();
    Ok(GaussRule1d { nodes, weights })
}

/// Implicit-shift QL iteration on a symmetric tridiagonal matrix.
///
/// On return `d` holds the eigenvalues and `z` the first components of the
/// matching normalized eigenvectors (the rotations are applied to the first
/// row of the identity only). `e[i]` couples rows `i` and `i + 1`.
fn tridiagonal_ql(d: &mut [f64], e: &mut [f64], z: &mut [f64]) -> Option<()> {
    let n = d.len();
    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > 60 {
                return None;
            }
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
            let mut underflow = false;
            let mut i = m;
            while i > l {
                i -= 1;
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    underflow = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
                let zf = z[i + 1];
                z[i + 1] = s * z[i] + c * zf;
                z[i] = c * z[i] - s * zf;
            }
            if underflow {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    Some(())
}

/// Gauss-Legendre rule on `[0, 1]` with `k` nodes.
pub fn gauss_legendre(k: usize) -> Result<GaussRule1d, QuadratureError> {
    if k == 0 {
        return Err(QuadratureError::InvalidCount(0));
    }
    // Legendre on [-1, 1]: a_n = 0, b_n = n^2 / (4n^2 - 1), mu0 = 2; mapped by x = (t + 1) / 2.
    let diag = vec![0.5; k];
    let off: Vec<f64> = (1..k)
        .map(|n| {
            let n = n as f64;
            n * n / (4.0 * n * n - 1.0) / 4.0
        })
        .collect();
    golub_welsch(&diag, &off, 1.0)
}

/// Gauss-Jacobi rule on `[0, 1]` for the weight `1 - x` with `k` nodes.
pub fn gauss_jacobi_1_0(k: usize) -> Result<GaussRule1d, QuadratureError> {
    if k == 0 {
        return Err(QuadratureError::InvalidCount(0));
    }
    // Jacobi(alpha = 1, beta = 0) on [-1, 1]:
    //   a_0 = -1/3, a_n = -1 / ((2n + 1)(2n + 3)), b_n = n (n + 1) / (2n + 1)^2, mu0 = 2.
    let diag: Vec<f64> = (0..k)
        .map(|n| {
            let n = n as f64;
            let a = -1.0 / ((2.0 * n + 1.0) * (2.0 * n + 3.0));
            0.5 * (a + 1.0)
        })
        .collect();
    let off: Vec<f64> = (1..k)
        .map(|n| {
            let n = n as f64;
            n * (n + 1.0) / ((2.0 * n + 1.0) * (2.0 * n + 1.0)) / 4.0
        })
        .collect();
    golub_welsch(&diag, &off, 0.5)
}

/// Quadrature rule on the reference triangle `conv{(0,0), (1,0), (0,1)}`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    pub points: Vec<Point>,
    pub weights: Vec<f64>,
    /// Total degree up to which polynomials are integrated exactly.
    pub exactness_degree: usize,
}

impl QuadratureRule {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Integrates `f` over the reference triangle.
    pub fn integrate_reference(&self, f: impl Fn(Point) -> f64) -> f64 {
        self.points.iter().zip(&self.weights).map(|(&p, &w)| w * f(p)).sum()
    }
}

/// Conical product rule with `k^2` points.
pub fn conical_rule(k: usize) -> Result<QuadratureRule, QuadratureError> {
    let jacobi = gauss_jacobi_1_0(k)?;
    let legendre = gauss_legendre(k)?;
    let mut points = Vec::with_capacity(k * k);
    let mut weights = Vec::with_capacity(k * k);
    for (&xi, &wj) in jacobi.nodes.iter().zip(&jacobi.weights) {
        for (&eta, &wl) in legendre.nodes.iter().zip(&legendre.weights) {
            points.push([xi, (1.0 - xi) * eta]);
            weights.push(wj * wl);
        }
    }
    Ok(QuadratureRule { points, weights, exactness_degree: 2 * k - 1 })
}

/// Shared conical rule for `1 <= k <= MAX_CACHED_K`.
pub fn cached_rule(k: usize) -> &'static QuadratureRule {
    static RULES: [OnceLock<QuadratureRule>; MAX_CACHED_K + 1] = [const { OnceLock::new() }; MAX_CACHED_K + 1];
    assert!((1..=MAX_CACHED_K).contains(&k), "cached rules exist for 1 <= k <= {MAX_CACHED_K}");
    RULES[k].get_or_init(|| conical_rule(k).expect("conical rule construction"))
}

/// Maps reference coordinates to the triangle `tri`.
#[inline]
pub fn map_to_triangle(tri: &[Point; 3], y: Point) -> Point {
    let [a, b, c] = *tri;
    [
        a[0] + (b[0] - a[0]) * y[0] + (c[0] - a[0]) * y[1],
        a[1] + (b[1] - a[1]) * y[0] + (c[1] - a[1]) * y[1],
    ]
}

/// Integrates a scalar field over `tri` with the `k x k` conical rule.
pub fn integrate_on_triangle(f: impl Fn(Point) -> f64, tri: &[Point; 3], k: usize) -> f64 {
    let rule = cached_rule(k);
    let jac = 2.0 * triangle_signed_area(tri[0], tri[1], tri[2]).abs();
    jac * rule.integrate_reference(|y| f(map_to_triangle(tri, y)))
}

/// Integrates a vector field over `tri` with the `k x k` conical rule.
pub fn integrate_vec_on_triangle(f: impl Fn(Point) -> Point, tri: &[Point; 3], k: usize) -> Point {
    let rule = cached_rule(k);
    let jac = 2.0 * triangle_signed_area(tri[0], tri[1], tri[2]).abs();
    let mut acc = [0.0, 0.0];
    for (&y, &w) in rule.points.iter().zip(&rule.weights) {
        let v = f(map_to_triangle(tri, y));
        acc[0] += w * v[0];
        acc[1] += w * v[1];
    }
    [jac * acc[0], jac * acc[1]]
}
