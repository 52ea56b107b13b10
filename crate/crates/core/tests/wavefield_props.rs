use delta_lab::charge::{solve_with_source, ChargeSolution, Method, SolverConfig};
use delta_lab::fixtures::{packet, CouplingFixture, Problem, Resolution};
use delta_lab::oracles::GaussianPacket;
use delta_lab::propagator::{evolve, point_source_kernel, LeakageGuard};
use delta_lab::signal::{Axis, ComplexSignal, UniformGrid};
use delta_lab::wavefield::{
    jump_residual, mass_and_h1, reconstruct_duhamel, reconstruct_duhamel_with, reconstruct_fourier,
    time_derivative, ReconstructionOptions,
};
use delta_lab::LabError;
use num_complex::Complex64;

fn small() -> Resolution {
    Resolution { window: 40.0, space_nodes: 2048, charge_nodes: 513, snapshots: 3, final_time: 1.0 }
}

/// The charge solution with `q` prescribed (zero coupling, so `q = q0`).
fn prescribed(q: ComplexSignal<f64>) -> ChargeSolution<f64> {
    let g = *q.grid();
    solve_with_source(&vec![0.0; g.count()], &q, &SolverConfig::new(g), Method::March).unwrap()
}

fn rel_l2(a: &ComplexSignal<f64>, b: &ComplexSignal<f64>) -> f64 {
    a.relative_distance(b).unwrap()
}

#[test]
fn zero_charge_gives_free_evolution() {
    let p = Problem::gaussian(CouplingFixture::Free, small()).unwrap();
    let q = p.solve(Method::March).unwrap();
    let times = p.resolution.times().unwrap();
    for field in [reconstruct_fourier(&p.u0, &q, &times).unwrap(), reconstruct_duhamel(&p.u0, &q, &times).unwrap()] {
        for (k, t) in times.points().enumerate() {
            assert!(rel_l2(&field.snapshots[k], &evolve(&p.u0, t).unwrap()) < 1e-10);
        }
        assert!(mass_and_h1(&field).unwrap().mass_drift <= 1e-10);
    }
}

#[test]
fn field_at_origin_reproduces_the_charge() {
    let p = Problem::gaussian(CouplingFixture::Smooth, small()).unwrap();
    let q = p.solve(Method::March).unwrap();
    let field = reconstruct_fourier(&p.u0, &q, &p.resolution.times().unwrap()).unwrap();
    let scale = q.q.sup_norm();
    for d in &field.diagnostics {
        let expected = q.q.interpolate(d.time);
        let got = d.trace_at_0 * p.alpha.truncated(d.time);
        assert!((got - expected).norm() <= 1e-3 * scale, "t = {}", d.time);
    }
}

#[test]
fn jump_residual_shrinks_with_the_space_step() {
    let worst = |n: usize| {
        let p = Problem::gaussian(CouplingFixture::Smooth, Resolution { space_nodes: n, ..small() }).unwrap();
        let q = p.solve(Method::March).unwrap();
        let field = reconstruct_fourier(&p.u0, &q, &p.resolution.times().unwrap()).unwrap();
        jump_residual(&field, &p.alpha).unwrap().into_iter().skip(1).fold(0.0, f64::max)
    };
    let coarse = worst(2048);
    let fine = worst(4096);
    let order = (coarse / fine).log2();
    assert!(order >= 1.0, "order {order} ({coarse:e} -> {fine:e})");
}

#[test]
fn narrow_pulse_radiates_the_point_source_kernel() {
    let sigma: f64 = 1e-3;
    let s0: f64 = 0.5;
    let g = UniformGrid::spanning(0.0, 1.0, 8001).unwrap();
    let pulse = ComplexSignal::from_real_fn(g, Axis::Time, |s: f64| (-(s - s0).powi(2) / (2.0 * sigma * sigma)).exp());
    let mass = sigma * (2.0 * std::f64::consts::PI).sqrt();
    let space = UniformGrid::centered(40.0, 2048).unwrap();
    let u0 = ComplexSignal::zeros(space, Axis::Space);
    let times = UniformGrid::spanning(0.0, 1.0, 2).unwrap();
    // A lone point source fills the window with constant modulus.
    let opts = ReconstructionOptions { images: 0, far_images: 0, guard: LeakageGuard::disabled(), ..Default::default() };
    let field = reconstruct_duhamel_with(&u0, &prescribed(pulse), &times, opts).unwrap();
    let u = &field.snapshots[1];
    for (k, x) in space.points().enumerate().filter(|(_, x)| x.abs() <= 3.0) {
        let expected = Complex64::new(0.0, -mass) * point_source_kernel(1.0 - s0, x).unwrap();
        assert!((u.values()[k] - expected).norm() <= 1e-3 * expected.norm(), "x = {x}");
    }
}

#[test]
fn free_time_derivative_is_the_laplacian() {
    let p = Problem::gaussian(CouplingFixture::Free, small()).unwrap();
    let q = p.solve(Method::March).unwrap();
    let wave: GaussianPacket = packet();
    let h = 1e-3;
    for t in [0.0, 0.4, 1.0] {
        let du = time_derivative(&p.u0, &q, t).unwrap();
        let lap = ComplexSignal::from_fn(*p.u0.grid(), Axis::Space, |x| {
            -(wave.value(t, x + h) - 2.0 * wave.value(t, x) + wave.value(t, x - h)) / (h * h)
        });
        let err = du.sub(&lap).unwrap().l2_norm() / lap.l2_norm();
        assert!(err < 1e-5, "t = {t}: {err:e}");
    }
}

#[test]
fn time_derivative_matches_central_differences() {
    let p = Problem::gaussian(CouplingFixture::Smooth, small()).unwrap();
    let q = p.solve(Method::March).unwrap();
    let t = 0.5;
    let du = time_derivative(&p.u0, &q, t).unwrap();
    let err = |h: f64| {
        let times = UniformGrid::new(t - h, 2.0 * h, 2).unwrap();
        let field = reconstruct_fourier(&p.u0, &q, &times).unwrap();
        let fd = field.snapshots[1].sub(&field.snapshots[0]).unwrap().scale(Complex64::new(0.0, 1.0 / (2.0 * h)));
        fd.sub(&du).unwrap().l2_norm() / du.l2_norm()
    };
    let coarse = err(0.05);
    let fine = err(0.025);
    assert!(coarse / fine >= 3.0, "{coarse:e} -> {fine:e}");
}

#[test]
fn data_outside_the_domain_are_rejected() {
    let res = small();
    let centered = GaussianPacket::new(1.0, 0.0, 0.0).unwrap();
    let u0 = centered.at(0.0, res.space().unwrap());
    let alpha = CouplingFixture::Constant.coupling().unwrap();
    let q = delta_lab::charge::solve(&alpha, &u0, &SolverConfig::new(res.charge().unwrap()), Method::March).unwrap();
    assert!(matches!(time_derivative(&u0, &q, 0.5), Err(LabError::NotInDomain(_))));
}

#[test]
fn bound_state_field() {
    let res = Resolution { charge_nodes: 513, ..Resolution::default() };
    let p = Problem::bound_state(res).unwrap();
    let q = p.solve(Method::March).unwrap();
    let field = reconstruct_fourier(&p.u0, &q, &res.times().unwrap()).unwrap();
    let diag = mass_and_h1(&field).unwrap();
    let h0 = diag.snapshots[0].h1;
    for d in &diag.snapshots {
        assert!((d.h1 - h0).abs() <= 1e-3 * h0, "t = {}", d.time);
    }
    let t = 0.75;
    let du = time_derivative(&p.u0, &q, t).unwrap();
    let u = delta_lab::oracles::bound_state_evolution(-2.0, t, *p.u0.grid()).unwrap();
    let minus_u = u.scale(Complex64::new(-1.0, 0.0));
    assert!(rel_l2(&du, &minus_u) <= 1e-3);
    assert!(jump_residual(&field, &p.alpha).unwrap().iter().all(|&r| r <= 1e-3));
}

#[test]
fn rough_coupling_keeps_the_field_bounded() {
    let p = Problem::gaussian(CouplingFixture::Rough, small()).unwrap();
    let q = p.solve(Method::March).unwrap();
    let field = reconstruct_fourier(&p.u0, &q, &p.resolution.times().unwrap()).unwrap();
    let diag = mass_and_h1(&field).unwrap();
    assert!(diag.h1_max.is_finite());
    assert!(diag.h1_max <= 2.0 * diag.snapshots[0].h1);
    assert!(diag.modulus_of_continuity.is_finite());
}
