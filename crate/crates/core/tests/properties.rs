use moment_qm::engine::{self, GroupPath, Quad};
use moment_qm::sampling::{random_compatible_j, random_sp_algebra, random_symplectic, random_tangent};
use moment_qm::siegel::{self, form_unchecked, geodesic, moment_map_sp, FormKind};
use moment_qm::spqm::{random_path, rotation_loop, SpAction};
use moment_qm::symplectic::{j_to_siegel, siegel_to_j, symplectic_residual, CompatibleJ, Mat};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn rel(a: &Mat, b: &Mat) -> f64 {
    (a - b).norm() / (1.0 + b.norm())
}

fn quick() -> Quad {
    Quad::new(8, 8)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn exp_of_algebra_is_symplectic(seed in any::<u64>(), n in 1usize..4) {
        let x = random_sp_algebra(&mut rng(seed), n, 0.8);
        let g = x.exp().unwrap();
        prop_assert!(symplectic_residual(&g.m) < 1e-9);
        // exp(X) exp(-X) = Id
        let back = g.mul(&x.scale(-1.0).exp().unwrap());
        prop_assert!(rel(&back.m, &Mat::identity(2 * n, 2 * n)) < 1e-10);
    }

    #[test]
    fn siegel_coordinates_round_trip(seed in any::<u64>(), n in 1usize..4) {
        let j = random_compatible_j(&mut rng(seed), n, 0.8);
        let back = siegel_to_j(&j_to_siegel(&j).unwrap()).unwrap();
        prop_assert!(rel(&back.m, &j.m) < 1e-9);
    }

    #[test]
    fn siegel_chart_is_equivariant(seed in any::<u64>(), n in 1usize..4) {
        let mut r = rng(seed);
        let j = random_compatible_j(&mut r, n, 0.6);
        let g = random_symplectic(&mut r, n, 0.5);
        let lhs = j_to_siegel(&g.act_j(&j)).unwrap();
        let rhs = g.act_siegel(&j_to_siegel(&j).unwrap());
        prop_assert!(rel(&lhs.x, &rhs.x) < 1e-8 && rel(&lhs.y, &rhs.y) < 1e-8);
    }

    #[test]
    fn geodesics_are_equivariant(seed in any::<u64>(), n in 1usize..3, t in 0.0f64..1.0) {
        let mut r = rng(seed);
        let x = random_compatible_j(&mut r, n, 0.6);
        let y = random_compatible_j(&mut r, n, 0.6);
        let g = random_symplectic(&mut r, n, 0.5);
        let lhs = geodesic(&g.act_j(&x), &g.act_j(&y), t);
        let rhs = g.act_j(&geodesic(&x, &y, t));
        prop_assert!(rel(&lhs.m, &rhs.m) < 1e-8);
    }

    #[test]
    fn forms_are_invariant(seed in any::<u64>(), n in 1usize..4) {
        let mut r = rng(seed);
        let j = random_compatible_j(&mut r, n, 0.6);
        let a = random_tangent(&mut r, &j, 1.0);
        let b = random_tangent(&mut r, &j, 1.0);
        let g = random_symplectic(&mut r, n, 0.5);
        let gi = g.inverse();
        let push = |v: &Mat| &g.m * v * &gi.m;
        for kind in FormKind::all() {
            let lhs = form_unchecked(kind, &g.act_j(&j), &push(&a), &push(&b));
            let rhs = form_unchecked(kind, &j, &a, &b);
            prop_assert!((lhs - rhs).abs() < 1e-8 * (1.0 + rhs.abs()));
            // antisymmetry
            prop_assert!((rhs + form_unchecked(kind, &j, &b, &a)).abs() < 1e-10 * (1.0 + rhs.abs()));
        }
    }

    #[test]
    fn moment_map_is_equivariant(seed in any::<u64>(), n in 1usize..4) {
        let mut r = rng(seed);
        let j = random_compatible_j(&mut r, n, 0.6);
        let x = random_sp_algebra(&mut r, n, 1.0);
        let g = random_symplectic(&mut r, n, 0.5);
        let lhs = moment_map_sp(&g.act_j(&j), &x.adjoint(&g));
        let rhs = moment_map_sp(&j, &x);
        prop_assert!((lhs - rhs).abs() < 1e-8 * (1.0 + rhs.abs()));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn triangle_area_is_cyclic_and_alternating(seed in any::<u64>()) {
        let mut r = rng(seed);
        let p: Vec<CompatibleJ> = (0..3).map(|_| random_compatible_j(&mut r, 1, 1.0)).collect();
        let (a, e1) = siegel::triangle_area(FormKind::Siegel, &p[0], &p[1], &p[2], Quad::default()).unwrap();
        let (b, e2) = siegel::triangle_area(FormKind::Siegel, &p[1], &p[2], &p[0], Quad::default()).unwrap();
        let (c, e3) = siegel::triangle_area(FormKind::Siegel, &p[1], &p[0], &p[2], Quad::default()).unwrap();
        let tol = 1e-6 + 10.0 * (e1 + e2 + e3);
        prop_assert!((a - b).abs() < tol, "{} {}", a, b);
        prop_assert!((a + c).abs() < tol, "{} {}", a, c);
        prop_assert!(a.abs() < std::f64::consts::PI);
    }

    #[test]
    fn inverse_path_negates_nu(seed in any::<u64>(), n in 1usize..3) {
        let mut r = rng(seed);
        let p = random_path(&mut r, n, 2, 1.0, 0.5, f64::INFINITY);
        let x = random_compatible_j(&mut r, n, 0.5);
        let act = SpAction::new(n, FormKind::Trace);
        let a = engine::nu_x(&act.space(), &act, &p, &x, Quad::default()).unwrap();
        let b = engine::nu_x(&act.space(), &act, &p.inverse(), &x, Quad::default()).unwrap();
        prop_assert!((a.value + b.value).abs() < 1e-6 + a.error_estimate + b.error_estimate);
    }

    #[test]
    fn conjugation_moves_the_basepoint(seed in any::<u64>()) {
        let mut r = rng(seed);
        let p = random_path(&mut r, 1, 2, 1.0, 0.5, f64::INFINITY);
        let h = random_symplectic(&mut r, 1, 0.5);
        let x = random_compatible_j(&mut r, 1, 0.5);
        let act = SpAction::new(1, FormKind::Siegel);
        let (lhs, rhs) = engine::conjugation_transport(&act.space(), &act, &p, &h, &x, Quad::default()).unwrap();
        prop_assert!((lhs.value - rhs.value).abs() < 1e-6 + lhs.error_estimate + rhs.error_estimate);
    }
}

#[test]
fn loops_are_additive_under_powers() {
    let act = SpAction::new(1, FormKind::Bergman);
    let x = random_compatible_j(&mut rng(3), 1, 0.7);
    let lp = rotation_loop(1, 1, 4);
    let one = engine::nu_x(&act.space(), &act, &lp, &x, quick()).unwrap().value;
    for k in [2usize, 3] {
        let v = engine::nu_x(&act.space(), &act, &lp.power(k), &x, quick()).unwrap().value;
        assert!((v - k as f64 * one).abs() < 1e-8, "k = {k}: {v} vs {one}");
    }
}

#[test]
fn constant_path_has_zero_nu() {
    let act = SpAction::new(2, FormKind::Trace);
    let x = random_compatible_j(&mut rng(4), 2, 0.7);
    let v = engine::nu_x(&act.space(), &act, &GroupPath::constant(2), &x, quick()).unwrap();
    assert_eq!(v.value, 0.0);
}

#[test]
fn homogenized_value_scales_with_powers() {
    let act = SpAction::new(1, FormKind::Trace);
    let x = CompatibleJ::standard(1);
    let p = random_path(&mut rng(8), 1, 3, 2.0, 0.5, f64::INFINITY);
    let h1 = engine::homogenize(&act.space(), &act, &p, &x, 8, Quad::default()).unwrap();
    let h2 = engine::homogenize(&act.space(), &act, &p.power(2), &x, 4, Quad::default()).unwrap();
    let gap = (h2.estimate - 2.0 * h1.estimate).abs();
    assert!(gap < h2.half_width + 2.0 * h1.half_width, "{gap} vs {} {}", h1.half_width, h2.half_width);
}
