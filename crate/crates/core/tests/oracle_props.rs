use delta_lab::coupling::CouplingPath;
use delta_lab::oracles::{
    bound_state_evolution, crank_nicolson_reference, crank_nicolson_reference_with, ReferenceOptions, free_gaussian, reference_space, restrict, BoundState,
    GaussianPacket,
};
use delta_lab::propagator::evolve;
use delta_lab::signal::{Axis, ComplexSignal, UniformGrid};
use delta_lab::LabError;
use num_complex::Complex64;
use proptest::prelude::*;

fn coupling(value: f64) -> CouplingPath<f64> {
    CouplingPath::constant(value, UniformGrid::spanning(-2.0, 2.0, 257).unwrap(), 4.0).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn bound_state_profile_is_normalized_and_satisfies_the_jump(alpha in -6.0f64..-0.5) {
        let grid = UniformGrid::centered(80.0, 1 << 16).unwrap();
        let b = BoundState::new(alpha, grid).unwrap();
        prop_assert!(b.jump_defect().abs() < 1e-12);
        prop_assert!((b.energy + alpha * alpha / 4.0).abs() < 1e-12);
        prop_assert!((b.profile.l2_norm() - 1.0).abs() < 1e-3);
        let later = bound_state_evolution(alpha, 0.7, grid).unwrap();
        prop_assert!((later.l2_norm() - b.profile.l2_norm()).abs() < 1e-12);
    }

    #[test]
    fn gaussian_solves_the_free_equation(w in 0.8f64..2.0, c in -3.0f64..3.0, k in -2.0f64..2.0, t in -1.0f64..1.0) {
        let grid = UniformGrid::centered(80.0, 2048).unwrap();
        let p = GaussianPacket::new(w, c, k).unwrap();
        let evolved = evolve(&p.at(0.0, grid), t).unwrap();
        prop_assert!(evolved.relative_distance(&p.at(t, grid)).unwrap() < 1e-10);
        prop_assert!((p.at(t, grid).l2_norm() - 1.0).abs() < 1e-10);
    }
}

#[test]
fn repulsive_coupling_has_no_bound_state() {
    let grid = UniformGrid::centered(10.0, 64).unwrap();
    assert!(BoundState::new(0.0, grid).is_err());
    assert!(BoundState::new(1.0, grid).is_err());
    assert!(GaussianPacket::new(0.0, 0.0, 0.0).is_err());
}

#[test]
fn centred_gaussian_helper_matches_the_packet() {
    let grid = UniformGrid::centered(40.0, 512).unwrap();
    let a = free_gaussian(0.3, 1.2, grid).unwrap();
    let b = GaussianPacket::new(1.2, 0.0, 0.0).unwrap().at(0.3, grid);
    assert!(a.relative_distance(&b).unwrap() < 1e-15);
}

#[test]
fn reference_solver_conserves_mass() {
    let space = UniformGrid::centered(40.0, 2048).unwrap();
    let u0 = GaussianPacket::new(1.0, 2.0, -1.0).unwrap().at(0.0, space);
    let times = UniformGrid::spanning(0.0, 1.0, 5).unwrap();
    let field = crank_nicolson_reference(&coupling(-2.0), &u0, &times, &space).unwrap();
    let m0 = field.diagnostics[0].mass;
    for d in &field.diagnostics {
        assert!((d.mass - m0).abs() <= 1e-10 * m0, "t = {}", d.time);
    }
}

#[test]
fn reference_solver_matches_free_gaussian() {
    let coarse = UniformGrid::centered(40.0, 1024).unwrap();
    let p = GaussianPacket::new(1.0, 2.0, -1.0).unwrap();
    let fine = reference_space(&coarse, 4).unwrap();
    let times = UniformGrid::spanning(0.0, 1.0, 3).unwrap();
    let field = crank_nicolson_reference(&coupling(0.0), &p.at(0.0, coarse), &times, &fine).unwrap();
    for (k, t) in times.points().enumerate() {
        let u = restrict(&field.snapshots[k], &coarse).unwrap();
        assert!(u.relative_distance(&p.at(t, coarse)).unwrap() < 1e-3, "t = {t}");
    }
}

#[test]
fn reference_jump_defect_is_first_order_in_h() {
    // e^{-|x|} decays only like xi^{-2}, so the quality band is taken at 1e-4.
    let opts = ReferenceOptions { band_fraction: 1e-4, ..Default::default() };
    let defect = |n: usize| {
        let space = UniformGrid::centered(40.0, n).unwrap();
        let u0 = ComplexSignal::from_real_fn(space, Axis::Space, |x: f64| (-x.abs()).exp());
        let times = UniformGrid::spanning(0.0, 0.5, 2).unwrap();
        let field = crank_nicolson_reference_with(&coupling(-2.0), &u0, &times, &space, opts).unwrap();
        let u = field.snapshots[1].values();
        let o = space.node_of(0.0).unwrap();
        let h = space.step();
        let jump = (u[o + 1] - u[o]) / h - (u[o] - u[o - 1]) / h;
        (jump - Complex64::new(-2.0, 0.0) * u[o]).norm()
    };
    let ratio = defect(2048) / defect(4096);
    assert!((1.6..2.4).contains(&ratio), "ratio {ratio}");
}

#[test]
fn reference_solver_rejects_unresolved_data() {
    let space = UniformGrid::centered(40.0, 512).unwrap();
    let fast = GaussianPacket::new(0.5, 0.0, 30.0).unwrap().at(0.0, space);
    let times = UniformGrid::spanning(0.0, 1.0, 2).unwrap();
    let r = crank_nicolson_reference(&coupling(0.0), &fast, &times, &space);
    assert!(matches!(r, Err(LabError::StepRejected(_))));
    let kink = ComplexSignal::from_real_fn(space, Axis::Space, |x| (-x.abs()).exp());
    let r = crank_nicolson_reference(&coupling(-2.0), &kink, &times, &space);
    assert!(matches!(r, Err(LabError::StepRejected(_))));
}

#[test]
fn restriction_checks_nesting() {
    let coarse = UniformGrid::<f64>::centered(10.0, 64).unwrap();
    assert!(matches!(reference_space(&coarse, 3), Err(LabError::NotPowerOfTwo(3))));
    let fine = reference_space(&coarse, 4).unwrap();
    let f = ComplexSignal::from_real_fn(fine, Axis::Space, |x| x.sin());
    let r = restrict(&f, &coarse).unwrap();
    for (k, x) in coarse.points().enumerate() {
        assert!((r.values()[k].re - x.sin()).abs() < 1e-12);
    }
    let shifted = UniformGrid::new(coarse.start() + 0.3 * fine.step(), coarse.step(), 8).unwrap();
    assert!(restrict(&f, &shifted).is_err());
}
