use moment_qm::engine::{self, HamiltonianAction, Quad};
use moment_qm::ham2d::measures::rotation_bump;
use moment_qm::ham2d::{
    hermitian_scalar_curvature, random_jfield, read_jfield, write_jfield, FlowTol, GridShift, HamAction, HamFlowSpec, JField, SurfaceGrid,
};
use moment_qm::siegel::FormKind;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn quick() -> Quad {
    Quad::new(4, 4)
}

fn bump(center: (f64, f64)) -> HamFlowSpec {
    HamFlowSpec::from_expr(&rotation_bump(0.05, 0.3, center), 1.0, 2, 5e-3).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn binary_fields_round_trip(seed in any::<u64>(), n in 16usize..40, disk in any::<bool>()) {
        let g = if disk { SurfaceGrid::disk(n, 1.5).unwrap() } else { SurfaceGrid::torus(n).unwrap() };
        let f = random_jfield(&mut rng(seed), g, 3, 2, 0.3);
        let mut buf = vec![];
        write_jfield(&mut buf, &f).unwrap();
        prop_assert_eq!(read_jfield(&buf[..]).unwrap(), f);
    }

    #[test]
    fn truncated_files_are_rejected(seed in any::<u64>(), cut in 1usize..64) {
        let g = SurfaceGrid::torus(16).unwrap();
        let f = random_jfield(&mut rng(seed), g, 2, 1, 0.2);
        let mut buf = vec![];
        write_jfield(&mut buf, &f).unwrap();
        buf.truncate(buf.len() - cut);
        prop_assert!(read_jfield(&buf[..]).is_err());
    }

    #[test]
    fn curvature_commutes_with_grid_shifts(seed in any::<u64>(), di in -8i64..8, dj in -8i64..8) {
        let g = SurfaceGrid::torus(24).unwrap();
        let act = HamAction::new(g, FormKind::Trace);
        let f = random_jfield(&mut rng(seed), g, 3, 2, 0.3);
        let h = GridShift { di, dj };
        let s = hermitian_scalar_curvature(&g, &f).unwrap();
        let moved = hermitian_scalar_curvature(&g, &act.act(&h, &f)).unwrap();
        for j in 0..24i64 {
            for i in 0..24i64 {
                let k = g.wrap(i, j).unwrap();
                let src = g.wrap(i - di, j - dj).unwrap();
                prop_assert!((moved[k] - s[src]).abs() < 1e-9 * (1.0 + s[src].abs()));
            }
        }
    }
}

#[test]
fn grid_shift_conjugation_transports_the_basepoint() {
    let g = SurfaceGrid::torus(16).unwrap();
    let act = HamAction::new(g, FormKind::Trace);
    let x = random_jfield(&mut rng(21), g, 2, 1, 0.2);
    // the shifted bump must stay inside the unit square, since the expression is not periodic
    let p = HamFlowSpec::from_expr(&rotation_bump(0.03, 0.2, (0.5, 0.5)), 1.0, 2, 5e-3).unwrap();
    let h = GridShift { di: 2, dj: -1 };
    let (lhs, rhs) = engine::conjugation_transport(&act.space(), &act, &p, &h, &x, quick()).unwrap();
    assert!((lhs.value - rhs.value).abs() < 1e-9 * (1.0 + lhs.value.abs()), "{} vs {}", lhs.value, rhs.value);
}

#[test]
fn reversed_flow_negates_nu_on_both_domains() {
    for g in [SurfaceGrid::torus(16).unwrap(), SurfaceGrid::disk(16, 1.0).unwrap()] {
        let act = HamAction::new(g, FormKind::Siegel);
        let center = if g.is_periodic() { (0.5, 0.5) } else { (0.0, 0.0) };
        let p = bump(center);
        let x = JField::standard(g);
        let a = engine::nu_x(&act.space(), &act, &p, &x, quick()).unwrap();
        let b = engine::nu_x(&act.space(), &act, &p.inverse(), &x, quick()).unwrap();
        assert!((a.value + b.value).abs() < 1e-4, "{} {}", a.value, b.value);
    }
}

#[test]
fn defect_converges_to_the_fiber_triangle() {
    // the per-node identity pairs linearizations at different nodes, so it holds up to the Riemann sum error
    let gap = |n: usize| {
        let g = SurfaceGrid::torus(n).unwrap();
        let act = HamAction::new(g, FormKind::Trace);
        let x = random_jfield(&mut rng(4), g, 2, 1, 0.15);
        let d = engine::defect(&act.space(), &act, &bump((0.45, 0.5)), &bump((0.55, 0.45)), &x, quick()).unwrap();
        ((d.defect - d.triangle).abs(), d.triangle.abs())
    };
    let (coarse, _) = gap(16);
    let (fine, tri) = gap(32);
    assert!(fine < coarse / 3.0, "{coarse} -> {fine}");
    assert!(fine < 0.03 * tri, "{fine} vs {tri}");
}

#[test]
fn flows_leaving_the_disk_are_rejected() {
    let g = SurfaceGrid::disk(16, 1.0).unwrap();
    let p = HamFlowSpec::from_expr("x*y", 1.0, 1, 1e-2).unwrap();
    assert!(p.validate(&g, FlowTol::default()).is_err());
    let act = HamAction::new(g, FormKind::Trace);
    assert!(engine::nu_x(&act.space(), &act, &p, &JField::standard(g), quick()).is_err());
}

