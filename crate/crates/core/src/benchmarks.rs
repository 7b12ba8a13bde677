//! Benchmark problems: constant data on the L-shape, the microstructure
//! indicator `f_eps`, and the smooth "waterfall" solution on the unit square.

use std::sync::{Arc, OnceLock};

use rayon::prelude::*;
use thiserror::Error;

use crate::fem::{DofMap, ElementGeometry, Solution};
use crate::geometry::{clip_convex, dot, Point, Polygon};
use crate::mesh::{Domain, ElementData, ElementSource, RefineMode, Triangulation};
use crate::quadrature::{integrate_on_triangle, MAX_CACHED_K};

/// Default number of Gauss points per direction for non-polynomial data.
pub const DEFAULT_QUAD_K: usize = 5;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProblemError {
    #[error("epsilon must lie in (0, 1/2), got {0}")]
    InvalidEpsilon(f64),
    #[error("unknown problem `{0}`")]
    UnknownProblem(String),
    #[error("cannot parse `{0}` as a number or a power like 2^-5")]
    BadNumber(String),
    #[error("quadrature order must be in 1..={MAX_CACHED_K}, got {0}")]
    BadQuadrature(usize),
    #[error("problem `{0}` has no exact solution")]
    NoExactSolution(String),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ProblemKind {
    /// `f` constant on the whole domain.
    Constant { value: f64 },
    /// Indicator of `[-1/2 - eps, -1/2 + eps] x [1/2 - eps, 1/2 + eps]`.
    Microstructure { epsilon: f64 },
    /// `f = -Laplace u` for the waterfall solution `u`.
    Waterfall,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Problem {
    pub kind: ProblemKind,
    pub domain: Domain,
    /// Points per direction for quadrature of non-polynomial data and errors.
    pub quad_k: usize,
}

impl Problem {
    /// `f = 1` on the L-shaped domain.
    pub fn lshape() -> Self {
        Self::constant(Domain::LShape, 1.0)
    }

    pub fn constant(domain: Domain, value: f64) -> Self {
        Problem { kind: ProblemKind::Constant { value }, domain, quad_k: DEFAULT_QUAD_K }
    }

    pub fn microstructure(epsilon: f64) -> Result<Self, ProblemError> {
        if !(epsilon > 0.0 && epsilon < 0.5) {
            return Err(ProblemError::InvalidEpsilon(epsilon));
        }
        Ok(Problem { kind: ProblemKind::Microstructure { epsilon }, domain: Domain::LShape, quad_k: DEFAULT_QUAD_K })
    }

    pub fn waterfall() -> Self {
        Problem { kind: ProblemKind::Waterfall, domain: Domain::UnitSquare, quad_k: DEFAULT_QUAD_K }
    }

    pub fn with_quad_k(mut self, k: usize) -> Result<Self, ProblemError> {
        if !(1..=MAX_CACHED_K).contains(&k) {
            return Err(ProblemError::BadQuadrature(k));
        }
        self.quad_k = k;
        Ok(self)
    }

    /// Parses `lshape`, `micro:<eps>` (e.g. `micro:2^-5`, `micro:0.03`) or `waterfall`.
    pub fn parse(name: &str) -> Result<Self, ProblemError> {
        match name {
            "lshape" => Ok(Self::lshape()),
            "waterfall" => Ok(Self::waterfall()),
            _ => match name.strip_prefix("micro:") {
                Some(eps) => Self::microstructure(parse_number(eps)?),
                None => Err(ProblemError::UnknownProblem(name.to_string())),
            },
        }
    }

    /// Short label used in file names and logs.
    pub fn name(&self) -> String {
        match self.kind {
            ProblemKind::Constant { .. } => "lshape".into(),
            ProblemKind::Microstructure { epsilon } => format!("micro:{epsilon}"),
            ProblemKind::Waterfall => "waterfall".into(),
        }
    }

    /// Initial mesh of the problem's domain with the element data attached.
    pub fn initial_mesh(&self) -> Triangulation {
        Triangulation::initial(self.domain).with_source(Arc::new(self.clone()))
    }

    pub fn f(&self, x: Point) -> f64 {
        match self.kind {
            ProblemKind::Constant { value } => value,
            ProblemKind::Microstructure { epsilon } => {
                if (x[0] + 0.5).abs() <= epsilon && (x[1] - 0.5).abs() <= epsilon {
                    1.0
                } else {
                    0.0
                }
            }
            ProblemKind::Waterfall => waterfall::f(x),
        }
    }

    /// `||f||^2_{L2(Omega)}`
    pub fn f_norm_sq(&self) -> f64 {
        match self.kind {
            ProblemKind::Constant { value } => {
                let area = match self.domain {
                    Domain::LShape => 3.0,
                    Domain::UnitSquare => 1.0,
                };
                value * value * area
            }
            ProblemKind::Microstructure { epsilon } => 4.0 * epsilon * epsilon,
            ProblemKind::Waterfall => waterfall::f_norm_sq_reference(),
        }
    }

    pub fn has_exact_solution(&self) -> bool {
        matches!(self.kind, ProblemKind::Waterfall)
    }

    pub fn exact_u(&self, x: Point) -> Option<f64> {
        self.has_exact_solution().then(|| waterfall::u(x))
    }

    pub fn exact_grad(&self, x: Point) -> Option<Point> {
        self.has_exact_solution().then(|| waterfall::grad_u(x))
    }

    /// Support of `f_eps` as a polygon.
    pub fn support(&self) -> Option<Polygon> {
        match self.kind {
            ProblemKind::Microstructure { epsilon } => {
                Some(Polygon::rectangle(-0.5 - epsilon, -0.5 + epsilon, 0.5 - epsilon, 0.5 + epsilon))
            }
            _ => None,
        }
    }
}

impl ElementSource for Problem {
    fn element_data(&self, tri: &[Point; 3]) -> ElementData {
        match self.kind {
            ProblemKind::Constant { value } => {
                let area = crate::geometry::triangle_signed_area(tri[0], tri[1], tri[2]);
                ElementData { integral: value * area, mu_sq: 0.0 }
            }
            ProblemKind::Microstructure { .. } => {
                let t = Polygon::triangle(tri[0], tri[1], tri[2]);
                let area = t.area();
                let s = clip_convex(&t, &self.support().unwrap()).area();
                // f^2 = f, so ||(1 - Pi) f||^2 = s - s^2/|T|.
                ElementData { integral: s, mu_sq: (s * (1.0 - s / area)).max(0.0) }
            }
            ProblemKind::Waterfall => {
                let k = self.quad_k;
                let area = crate::geometry::triangle_signed_area(tri[0], tri[1], tri[2]);
                let integral = integrate_on_triangle(waterfall::f, tri, k);
                let mean = integral / area;
                let mu_sq = integrate_on_triangle(|x| (waterfall::f(x) - mean).powi(2), tri, k);
                ElementData { integral, mu_sq }
            }
        }
    }
}

/// Parses a decimal or a power `a^b` such as `2^-5`.
fn parse_number(s: &str) -> Result<f64, ProblemError> {
    let bad = || ProblemError::BadNumber(s.to_string());
    match s.split_once('^') {
        Some((base, exp)) => {
            let base: f64 = base.trim().parse().map_err(|_| bad())?;
            let exp: i32 = exp.trim().parse().map_err(|_| bad())?;
            Ok(base.powi(exp))
        }
        None => s.trim().parse().map_err(|_| bad()),
    }
}

/// Errors of a discrete solution against the exact waterfall solution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExactErrors {
    /// `||grad(u - u_h)||`
    pub grad: f64,
    /// `||p - p_h||`
    pub flux_l2: f64,
    /// `||div(p - p_h)|| = ||f + div p_h||`
    pub flux_div: f64,
}

pub fn exact_errors(problem: &Problem, mesh: &Triangulation, dofs: &DofMap, solution: &Solution) -> Result<ExactErrors, ProblemError> {
    if !problem.has_exact_solution() {
        return Err(ProblemError::NoExactSolution(problem.name()));
    }
    let k = problem.quad_k;
    let per_leaf: Vec<[f64; 3]> = mesh
        .leaves()
        .par_iter()
        .enumerate()
        .map(|(leaf, &id)| {
            let tri = mesh.triangle(id);
            let geo = ElementGeometry::new(tri);
            let field = solution.local_field(dofs, leaf, &geo);
            let g = integrate_on_triangle(
                |x| {
                    let d = crate::geometry::sub(waterfall::grad_u(x), field.grad_u);
                    dot(d, d)
                },
                &tri,
                k,
            );
            let p = integrate_on_triangle(
                |x| {
                    let d = crate::geometry::sub(waterfall::grad_u(x), field.flux(x));
                    dot(d, d)
                },
                &tri,
                k,
            );
            let node = mesh.node(id);
            let jump = node.data.integral / node.area + field.div_flux();
            [g, p, node.data.mu_sq + node.area * jump * jump]
        })
        .collect();
    let mut sums = [0.0; 3];
    for v in &per_leaf {
        for i in 0..3 {
            sums[i] += v[i];
        }
    }
    Ok(ExactErrors { grad: sums[0].sqrt(), flux_l2: sums[1].sqrt(), flux_div: sums[2].sqrt() })
}

/// `u(x) = g(x1) h(x2)` with `g(t) = t(t-1) exp(-100 (t - 1/2)^2)` and
/// `h(t) = t(t-1) exp(-(t - 117)^2 / 10000)`.
pub mod waterfall {
    use super::*;

    /// `(a, a', a'')` for `a(t) = t(t-1) exp(phi(t))` with
    /// `phi(t) = -(t - c)^2 / w`.
    fn factor(t: f64, c: f64, w: f64) -> (f64, f64, f64) {
        let q = t * (t - 1.0);
        let dq = 2.0 * t - 1.0;
        let ddq = 2.0;
        let phi = -(t - c) * (t - c) / w;
        let dphi = -2.0 * (t - c) / w;
        let ddphi = -2.0 / w;
        let e = phi.exp();
        (q * e, (dq + q * dphi) * e, (ddq + 2.0 * dq * dphi + q * ddphi + q * dphi * dphi) * e)
    }

    #[inline]
    fn g(t: f64) -> (f64, f64, f64) {
        factor(t, 0.5, 0.01)
    }

    #[inline]
    fn h(t: f64) -> (f64, f64, f64) {
        factor(t, 117.0, 10000.0)
    }

    pub fn u(x: Point) -> f64 {
        g(x[0]).0 * h(x[1]).0
    }

    pub fn grad_u(x: Point) -> Point {
        let (g0, g1, _) = g(x[0]);
        let (h0, h1, _) = h(x[1]);
        [g1 * h0, g0 * h1]
    }

    /// `-Laplace u`
    pub fn f(x: Point) -> f64 {
        let (g0, _, g2) = g(x[0]);
        let (h0, _, h2) = h(x[1]);
        -(g2 * h0 + g0 * h2)
    }

    /// `||f||^2` on `(0, 1)^2` from a fine uniform mesh and 8 x 8 points per triangle.
    pub fn f_norm_sq_reference() -> f64 {
        static VALUE: OnceLock<f64> = OnceLock::new();
        *VALUE.get_or_init(|| {
            let mut mesh = Triangulation::initial(Domain::UnitSquare);
            for _ in 0..6 {
                let all = mesh.leaves().to_vec();
                mesh.refine(&all, RefineMode::Bisec3).expect("uniform refinement");
            }
            let parts: Vec<f64> = mesh
                .leaves()
                .par_iter()
                .map(|&id| integrate_on_triangle(|x| f(x).powi(2), &mesh.triangle(id), 8))
                .collect();
            parts.iter().sum()
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn parse_names() {
        assert_eq!(Problem::parse("lshape").unwrap(), Problem::lshape());
        assert_eq!(Problem::parse("micro:2^-5").unwrap().kind, ProblemKind::Microstructure { epsilon: 1.0 / 32.0 });
        assert_eq!(Problem::parse("micro:3^-3").unwrap().kind, ProblemKind::Microstructure { epsilon: 1.0 / 27.0 });
        assert_eq!(Problem::parse("micro:0.25").unwrap().kind, ProblemKind::Microstructure { epsilon: 0.25 });
        assert!(Problem::parse("micro:0.5").is_err());
        assert!(Problem::parse("micro:x").is_err());
        assert!(Problem::parse("disk").is_err());
    }

    #[test]
    fn constant_data_has_no_data_error() {
        let m = Problem::lshape().initial_mesh();
        for &id in m.leaves() {
            assert_eq!(m.node(id).data.integral, m.node(id).area);
            assert_eq!(m.node(id).data.mu_sq, 0.0);
        }
        assert_eq!(Problem::lshape().f_norm_sq(), 3.0);
    }

    #[test]
    fn support_inside_one_triangle() {
        // supp of f_eps with eps = 2^-5 lies inside conv{(-1,0),(0,0),(-1/2,1)}, |T| = 1/2.
        let p = Problem::microstructure(1.0 / 32.0).unwrap();
        let d = p.element_data(&[[-1.0, 0.0], [0.0, 0.0], [-0.5, 1.0]]);
        assert_eq!(d.integral, 1.0 / 256.0);
        assert!((d.mu_sq - (1.0 / 256.0) * (1.0 - 1.0 / 128.0)).abs() < 1e-18);
        let far = p.element_data(&[[0.0, -1.0], [1.0, -1.0], [0.0, 0.0]]);
        assert_eq!(far, ElementData::default());
    }

    #[test]
    fn triangle_inside_support_has_exactly_zero_error() {
        let p = Problem::microstructure(1.0 / 8.0).unwrap();
        let d = p.element_data(&[[-0.55, 0.45], [-0.5, 0.45], [-0.55, 0.52]]);
        assert!(d.integral > 0.0);
        assert_eq!(d.mu_sq, 0.0);
    }

    #[test]
    fn clipped_integrals_match_monte_carlo() {
        let p = Problem::microstructure(0.15).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..3 {
            let c = [rng.gen_range(-0.7..-0.3), rng.gen_range(0.3..0.7)];
            let mut tri: [Point; 3] = std::array::from_fn(|_| [c[0] + rng.gen_range(-0.3..0.3), c[1] + rng.gen_range(-0.3..0.3)]);
            if crate::geometry::triangle_signed_area(tri[0], tri[1], tri[2]) < 0.0 {
                tri.swap(1, 2);
            }
            let area = crate::geometry::triangle_signed_area(tri[0], tri[1], tri[2]);
            let exact = p.element_data(&tri).integral;
            let n = 1_000_000;
            let mut hits = 0usize;
            for _ in 0..n {
                let (mut a, mut b): (f64, f64) = (rng.gen(), rng.gen());
                if a + b > 1.0 {
                    a = 1.0 - a;
                    b = 1.0 - b;
                }
                let x = crate::quadrature::map_to_triangle(&tri, [a, b]);
                hits += (p.f(x) > 0.0) as usize;
            }
            let frac = hits as f64 / n as f64;
            let sigma = (frac * (1.0 - frac) / n as f64).sqrt() * area;
            assert!((frac * area - exact).abs() <= 3.0 * sigma + 1e-12, "{} vs {exact}", frac * area);
        }
    }

    fn random_children_defects(problem: &Problem, pre_levels: usize, steps: usize) -> (f64, f64) {
        let mut m = problem.initial_mesh();
        for _ in 0..pre_levels {
            let all = m.leaves().to_vec();
            m.refine(&all, RefineMode::Bisec3).unwrap();
        }
        let first_new = m.nodes().len();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..steps {
            let l = m.leaves()[rng.gen_range(0..m.n_leaves())];
            m.refine(&[l], RefineMode::RefinementEdge).unwrap();
        }
        let (mut integral_defect, mut mu_growth) = (0.0f64, 0.0f64);
        for node in m.nodes().iter() {
            let Some([c1, c2]) = node.children else { continue };
            if c1 < first_new && pre_levels > 0 {
                continue;
            }
            let sum = m.node(c1).data.integral + m.node(c2).data.integral;
            integral_defect = integral_defect.max((sum - node.data.integral).abs());
            mu_growth = mu_growth.max(m.node(c1).data.mu_sq + m.node(c2).data.mu_sq - node.data.mu_sq);
        }
        (integral_defect, mu_growth)
    }

    #[test]
    fn exact_element_data_is_additive_under_bisection() {
        for problem in [Problem::lshape(), Problem::microstructure(3f64.powi(-3)).unwrap()] {
            let (defect, growth) = random_children_defects(&problem, 0, 60);
            assert!(defect <= 1e-12, "{problem:?}: {defect}");
            assert!(growth <= 1e-12, "{problem:?}: {growth}");
        }
    }

    #[test]
    fn quadrature_element_data_is_additive_on_resolved_meshes() {
        // The waterfall data is integrated with a fixed rule, so additivity holds
        // up to the quadrature error, which is tiny once the Gaussian is resolved.
        let (defect, growth) = random_children_defects(&Problem::waterfall(), 5, 60);
        assert!(defect <= 1e-10, "{defect}");
        assert!(growth <= 1e-10, "{growth}");
    }

    #[test]
    fn support_is_partitioned_by_every_mesh() {
        let eps = 3f64.powi(-3);
        let p = Problem::microstructure(eps).unwrap();
        let mut m = p.initial_mesh();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..200 {
            let l = m.leaves()[rng.gen_range(0..m.n_leaves())];
            m.refine(&[l], RefineMode::Bisec3).unwrap();
            let total: f64 = m.leaves().iter().map(|&id| m.node(id).data.integral).sum();
            assert!((total - 4.0 * eps * eps).abs() <= 1e-12);
        }
    }

    #[test]
    fn waterfall_minus_laplacian_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let h = 1e-5;
        for _ in 0..100 {
            let x = [rng.gen_range(0.05..0.95), rng.gen_range(0.05..0.95)];
            let u = waterfall::u;
            let lap = (u([x[0] + h, x[1]]) + u([x[0] - h, x[1]]) + u([x[0], x[1] + h]) + u([x[0], x[1] - h]) - 4.0 * u(x)) / (h * h);
            let f = waterfall::f(x);
            let grad = waterfall::grad_u(x);
            let gx = (u([x[0] + h, x[1]]) - u([x[0] - h, x[1]])) / (2.0 * h);
            assert!((-lap - f).abs() <= 1e-6 * f.abs().max(1.0), "{x:?}: {} vs {f}", -lap);
            assert!((gx - grad[0]).abs() <= 1e-6 * grad[0].abs().max(1e-2));
        }
    }

    #[test]
    fn waterfall_shape() {
        for t in [0.0, 0.3, 1.0] {
            for x in [[t, 0.0], [t, 1.0], [0.0, t], [1.0, t]] {
                assert_eq!(waterfall::u(x), 0.0);
            }
        }
        assert!(waterfall::u([0.5, 0.5]) > 0.0);
        assert!(waterfall::u([0.5, 0.5]) > waterfall::u([0.4, 0.5]));
        assert!(waterfall::u([0.5, 0.5]) > waterfall::u([0.6, 0.5]));
    }

    #[test]
    fn waterfall_norm_is_stable_under_quadrature_order() {
        let reference = waterfall::f_norm_sq_reference();
        let mut mesh = Triangulation::initial(Domain::UnitSquare);
        for _ in 0..5 {
            let all = mesh.leaves().to_vec();
            mesh.refine(&all, RefineMode::Bisec3).unwrap();
        }
        let coarse: f64 = mesh.leaves().iter().map(|&id| integrate_on_triangle(|x| waterfall::f(x).powi(2), &mesh.triangle(id), 10)).sum();
        assert!((coarse - reference).abs() <= 1e-10 * reference);
    }

    #[test]
    fn exact_errors_of_zero_solution() {
        let p = Problem::waterfall();
        let mut m = p.initial_mesh();
        for _ in 0..2 {
            let all = m.leaves().to_vec();
            m.refine(&all, RefineMode::Bisec3).unwrap();
        }
        let d = DofMap::new(&m);
        let e = exact_errors(&p, &m, &d, &Solution::zeros(&d)).unwrap();
        let grad_sq: f64 = m.leaves().iter().map(|&id| integrate_on_triangle(|x| dot(waterfall::grad_u(x), waterfall::grad_u(x)), &m.triangle(id), 5)).sum();
        assert!((e.grad * e.grad - grad_sq).abs() <= 1e-12 * grad_sq);
        assert_eq!(e.grad, e.flux_l2);
        assert!(exact_errors(&Problem::lshape(), &m, &d, &Solution::zeros(&d)).is_err());
    }
}
