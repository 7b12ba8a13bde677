mod common;

use std::f64::consts::FRAC_PI_4;

use alsfem::adaptivity::{adaptive_loop_with, AdaptiveParams, Algorithm};
use alsfem::benchmarks::Problem;
use alsfem::geometry::{clip_convex, polygon_area, Polygon};
use alsfem::mesh::{Domain, RefineMode, Triangulation};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::{assert_conforming, random_refinement};

fn mode(bisec3: bool) -> RefineMode {
    if bisec3 {
        RefineMode::Bisec3
    } else {
        RefineMode::RefinementEdge
    }
}

fn uniform_min_angle(domain: Domain) -> f64 {
    let mut m = Triangulation::initial(domain);
    for _ in 0..2 {
        let all = m.leaves().to_vec();
        m.refine(&all, RefineMode::Bisec3).unwrap();
    }
    m.min_angle()
}

#[test]
fn ten_thousand_random_refinement_steps_stay_conforming_and_shape_regular() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut steps = 0;
    for run in 0.. {
        if steps >= 10_000 {
            break;
        }
        let domain = if run % 2 == 0 { Domain::LShape } else { Domain::UnitSquare };
        let bound = uniform_min_angle(domain);
        assert!((bound - FRAC_PI_4).abs() < 1e-12);
        let mut m = Triangulation::initial(domain);
        for _ in 0..500 {
            let k = rng.gen_range(1..=3);
            let marked: Vec<usize> = (0..k).map(|_| m.leaves()[rng.gen_range(0..m.n_leaves())]).collect();
            m.refine(&marked, mode(rng.gen_bool(0.3))).unwrap();
            assert_conforming(&m);
            assert!(m.min_angle() >= bound - 1e-12);
            steps += 1;
        }
        let area = if domain == Domain::LShape { 3.0 } else { 1.0 };
        assert!((m.total_area() - area).abs() < 1e-12);
    }
}

#[test]
fn nvb_growth_is_bounded_by_marked_elements() {
    let problems = [Problem::lshape(), Problem::microstructure(3f64.powi(-3)).unwrap(), Problem::waterfall()];
    let mut worst: f64 = 0.0;
    for problem in &problems {
        for algorithm in [Algorithm::Nalsfem, Algorithm::Calsfem] {
            let params = AdaptiveParams { max_ndof: 20_000, ..AdaptiveParams::new(algorithm) };
            let n0 = problem.initial_mesh().n_leaves();
            let mut marked_total = 0usize;
            adaptive_loop_with(problem, &params, |state| {
                if marked_total > 0 {
                    worst = worst.max((state.mesh.n_leaves() - n0) as f64 / marked_total as f64);
                }
                marked_total += state.n_marked;
                Ok(())
            })
            .unwrap();
        }
    }
    println!("observed NVB constant: {worst:.3}");
    assert!(worst <= 50.0);
}

#[test]
fn grandchildren_are_similar_to_their_grandparent() {
    let m0 = Triangulation::initial(Domain::LShape);
    let mut m = m0.clone();
    let all = m.leaves().to_vec();
    m.refine(&all, RefineMode::Bisec3).unwrap();
    let sorted_sides = |p: [[f64; 2]; 3]| {
        let mut s: Vec<f64> = (0..3).map(|k| alsfem::geometry::norm(alsfem::geometry::sub(p[(k + 1) % 3], p[k]))).collect();
        s.sort_by(f64::total_cmp);
        s
    };
    for &id in m.leaves() {
        let gp = m.node(m.node(m.node(id).parent.unwrap()).parent.unwrap());
        assert_eq!(m.node(id).generation, gp.generation + 2);
        let a = sorted_sides(m.triangle(id));
        let b = sorted_sides(gp.vertices.map(|v| m.vertices()[v as usize]));
        for (x, y) in a.iter().zip(&b) {
            assert!((x - 0.5 * y).abs() < 1e-14);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn children_halve_the_parent(seed in any::<u64>(), steps in 1usize..60, bisec3 in any::<bool>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut m = Triangulation::initial(Domain::UnitSquare);
        random_refinement(&mut m, &mut rng, steps, mode(bisec3));
        for n in m.nodes() {
            if let Some([a, b]) = n.children {
                prop_assert_eq!(m.node(a).area, n.area / 2.0);
                prop_assert_eq!(m.node(b).area, n.area / 2.0);
                prop_assert_eq!(m.node(a).generation, n.generation + 1);
            }
        }
    }

    #[test]
    fn identical_marks_give_identical_meshes(seed in any::<u64>(), steps in 1usize..40) {
        let build = || {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut m = Triangulation::initial(Domain::LShape);
            random_refinement(&mut m, &mut rng, steps, RefineMode::RefinementEdge);
            m
        };
        let (a, b) = (build(), build());
        prop_assert_eq!(a.vertices(), b.vertices());
        let tris = |m: &Triangulation| m.leaves().iter().map(|&id| m.node(id).vertices).collect::<Vec<_>>();
        prop_assert_eq!(tris(&a), tris(&b));
    }

    #[test]
    fn mu_never_increases_under_refinement(seed in any::<u64>(), eps_exp in 1i32..5) {
        let p = Problem::microstructure(3f64.powi(-eps_exp)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut m = p.initial_mesh();
        let mut prev = m.mu_sq_total();
        for _ in 0..30 {
            random_refinement(&mut m, &mut rng, 1, RefineMode::RefinementEdge);
            let now = m.mu_sq_total();
            prop_assert!(now <= prev + 1e-12, "{} > {}", now, prev);
            prev = now;
        }
        for n in m.nodes() {
            if let Some([a, b]) = n.children {
                let sum = m.node(a).data.mu_sq + m.node(b).data.mu_sq;
                prop_assert!(sum <= n.data.mu_sq + 1e-12);
            }
        }
    }

    #[test]
    fn mu_tilde_follows_the_recursion(seed in any::<u64>()) {
        let p = Problem::microstructure(3f64.powi(-2)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut m = p.initial_mesh();
        random_refinement(&mut m, &mut rng, 40, RefineMode::RefinementEdge);
        for (id, n) in m.nodes().iter().enumerate() {
            prop_assert!(n.mu_tilde.is_finite() && n.mu_tilde >= 0.0);
            match n.parent {
                None => prop_assert_eq!(n.mu_tilde, n.mu()),
                Some(par) => {
                    let pn = m.node(par);
                    let [a, b] = pn.children.unwrap();
                    let denom = pn.mu() + pn.mu_tilde;
                    let expected = if denom > 0.0 { (m.node(a).mu() + m.node(b).mu()) * pn.mu_tilde / denom } else { 0.0 };
                    prop_assert!((n.mu_tilde - expected).abs() <= 1e-15 * expected.max(1.0), "node {}", id);
                    if denom > 0.0 && m.node(a).mu() + m.node(b).mu() > 0.0 {
                        prop_assert!(n.mu_tilde > 0.0);
                    }
                }
            }
        }
    }

    #[test]
    fn clipped_area_bounds_and_additivity(
        ax in -2.0f64..2.0, ay in -2.0f64..2.0, bx in -2.0f64..2.0, by in -2.0f64..2.0,
        cx in -2.0f64..2.0, cy in -2.0f64..2.0, x0 in -1.5f64..1.0, y0 in -1.5f64..1.0, s in 0.01f64..1.5,
    ) {
        let area2 = (bx - ax) * (cy - ay) - (by - ay) * (cx - ax);
        prop_assume!(area2.abs() > 1e-3);
        let (b, c) = if area2 > 0.0 { ([bx, by], [cx, cy]) } else { ([cx, cy], [bx, by]) };
        let a = [ax, ay];
        let sq = Polygon::rectangle(x0, x0 + s, y0, y0 + s);
        let whole = polygon_area(&clip_convex(&Polygon::triangle(a, b, c), &sq));
        let tri_area = area2.abs() / 2.0;
        prop_assert!(whole <= tri_area.min(s * s) + 1e-12);
        for (p, q, r) in [(b, c, a), (c, a, b)] {
            prop_assert!((polygon_area(&clip_convex(&Polygon::triangle(p, q, r), &sq)) - whole).abs() < 1e-12);
        }
        // Bisect the edge b-c.
        let m = [(b[0] + c[0]) / 2.0, (b[1] + c[1]) / 2.0];
        let halves = polygon_area(&clip_convex(&Polygon::triangle(m, a, b), &sq))
            + polygon_area(&clip_convex(&Polygon::triangle(m, c, a), &sq));
        prop_assert!((halves - whole).abs() < 1e-12);
    }
}
