#![allow(dead_code)]

use std::collections::HashMap;

use alsfem::fem::DofMap;
use alsfem::geometry::Point;
use alsfem::mesh::{RefineMode, Triangulation};
use alsfem::quadrature::integrate_on_triangle;
use rand::Rng;

/// Bisects `steps` randomly chosen leaves one at a time.
pub fn random_refinement(mesh: &mut Triangulation, rng: &mut impl Rng, steps: usize, mode: RefineMode) {
    for _ in 0..steps {
        let l = mesh.leaves()[rng.gen_range(0..mesh.n_leaves())];
        mesh.refine(&[l], mode).unwrap();
    }
}

fn on_lshape_boundary(p: Point) -> bool {
    let [x, y] = p;
    x.abs() == 1.0 || y.abs() == 1.0 || (x == 0.0 && y >= 0.0) || (y == 0.0 && x >= 0.0)
}

fn on_square_boundary(p: Point) -> bool {
    let [x, y] = p;
    x == 0.0 || x == 1.0 || y == 0.0 || y == 1.0
}

/// Checks conformity from the raw leaf list: an edge seen once must lie on the
/// domain boundary, no edge is shared by more than two leaves, and the Euler
/// formula of a simply connected domain holds.
pub fn assert_conforming(mesh: &Triangulation) {
    let mut count: HashMap<(u32, u32), usize> = HashMap::new();
    let mut used = std::collections::HashSet::new();
    for &id in mesh.leaves() {
        let v = mesh.node(id).vertices;
        for k in 0..3 {
            let a = v[(k + 1) % 3];
            let b = v[(k + 2) % 3];
            *count.entry((a.min(b), a.max(b))).or_default() += 1;
            used.insert(v[k]);
        }
    }
    let x = mesh.vertices();
    for (&(a, b), &c) in &count {
        assert!(c <= 2, "edge {a}-{b} has {c} leaves");
        if c == 1 {
            let mid = [(x[a as usize][0] + x[b as usize][0]) / 2.0, (x[a as usize][1] + x[b as usize][1]) / 2.0];
            let on = |p| on_lshape_boundary(p) || on_square_boundary(p);
            assert!(on(x[a as usize]) && on(x[b as usize]) && on(mid), "interior edge {a}-{b} has one leaf");
        }
    }
    assert_eq!(used.len() + mesh.n_leaves(), count.len() + 1, "Euler formula");
}

/// RT0 basis on a triangle as `a x + b`, solved from unit flux on edge `k`
/// and zero flux on the others.
pub fn brute_force_rt_basis(tri: &[Point; 3], normals: &[Point; 3]) -> [[f64; 3]; 3] {
    let mut out = [[0.0; 3]; 3];
    for k in 0..3 {
        let mut m = [[0.0; 4]; 3];
        for j in 0..3 {
            let p = tri[(j + 1) % 3];
            let q = tri[(j + 2) % 3];
            let mid = [(p[0] + q[0]) / 2.0, (p[1] + q[1]) / 2.0];
            let n = normals[j];
            m[j] = [mid[0] * n[0] + mid[1] * n[1], n[0], n[1], if j == k { 1.0 } else { 0.0 }];
        }
        for col in 0..3 {
            let piv = (col..3).max_by(|&a, &b| m[a][col].abs().total_cmp(&m[b][col].abs())).unwrap();
            m.swap(col, piv);
            for r in 0..3 {
                if r != col {
                    let f = m[r][col] / m[col][col];
                    for c in col..4 {
                        m[r][c] -= f * m[col][c];
                    }
                }
            }
        }
        out[k] = [m[0][3] / m[0][0], m[1][3] / m[1][1], m[2][3] / m[2][2]];
    }
    out
}

pub fn hat_gradient(tri: &[Point; 3], k: usize) -> Point {
    let p = tri[(k + 1) % 3];
    let q = tri[(k + 2) % 3];
    let d = [q[0] - p[0], q[1] - p[1]];
    let denom = (tri[k][0] - p[0]) * d[1] - (tri[k][1] - p[1]) * d[0];
    [d[1] / denom, -d[0] / denom]
}

type Basis = (usize, Box<dyn Fn(Point) -> Point>, f64, Point);

/// Dense least-squares matrix and load vector assembled basis function by
/// basis function with quadrature.
pub fn dense_oracle(mesh: &Triangulation, dofs: &DofMap) -> (Vec<Vec<f64>>, Vec<f64>) {
    let n = dofs.ndof();
    let mut a = vec![vec![0.0; n]; n];
    let mut b = vec![0.0; n];
    for (leaf, &id) in mesh.leaves().iter().enumerate() {
        let tri = mesh.triangle(id);
        let normals: [Point; 3] = std::array::from_fn(|k| dofs.connectivity.edges[dofs.edge_dofs[leaf][k]].normal);
        let rt = brute_force_rt_basis(&tri, &normals);
        let mut funcs: Vec<Basis> = Vec::new();
        for [al, b0, b1] in rt.into_iter().take(3) {
            let k = funcs.len();
            funcs.push((dofs.edge_dofs[leaf][k], Box::new(move |x: Point| [al * x[0] + b0, al * x[1] + b1]), 2.0 * al, [0.0, 0.0]));
        }
        for k in 0..3 {
            if let Some(g) = dofs.vertex_dofs[leaf][k] {
                funcs.push((g, Box::new(|_| [0.0, 0.0]), 0.0, hat_gradient(&tri, k)));
            }
        }
        let integral = mesh.node(id).data.integral;
        for (gi, qi, di, gvi) in &funcs {
            b[*gi] += -di * integral;
            for (gj, qj, dj, gvj) in &funcs {
                let mass = integrate_on_triangle(
                    |x| {
                        let u = qi(x);
                        let v = qj(x);
                        (u[0] - gvi[0]) * (v[0] - gvj[0]) + (u[1] - gvi[1]) * (v[1] - gvj[1])
                    },
                    &tri,
                    3,
                );
                a[*gi][*gj] += di * dj * mesh.node(id).area + mass;
            }
        }
    }
    (a, b)
}

pub fn rel_diff(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}
