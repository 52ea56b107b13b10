use delta_lab::propagator::{evolve, origin_trace, point_source_kernel};
use delta_lab::quadrature::GaussRule;
use delta_lab::signal::{Axis, ComplexSignal, UniformGrid};
use delta_lab::LabError;
use num_complex::Complex64;
use proptest::prelude::*;

fn packet(grid: UniformGrid<f64>, c: f64, w: f64, k: f64) -> ComplexSignal<f64> {
    ComplexSignal::from_fn(grid, Axis::Space, |x| Complex64::from_polar((-(x - c).powi(2) / (2.0 * w * w)).exp(), k * x))
}

fn grid() -> UniformGrid<f64> {
    UniformGrid::centered(80.0, 2048).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn evolution_is_unitary(c in -3.0f64..3.0, w in 0.8f64..2.0, k in -3.0f64..3.0, t in -1.0f64..1.0) {
        let u0 = packet(grid(), c, w, k);
        let u = evolve(&u0, t).unwrap();
        prop_assert!((u.l2_norm() - u0.l2_norm()).abs() <= 1e-10 * u0.l2_norm());
    }

    #[test]
    fn evolution_is_a_group(c in -3.0f64..3.0, w in 0.8f64..2.0, k in -3.0f64..3.0, t in -0.5f64..0.5, s in -0.5f64..0.5) {
        let u0 = packet(grid(), c, w, k);
        let two_steps = evolve(&evolve(&u0, t).unwrap(), s).unwrap();
        let one_step = evolve(&u0, t + s).unwrap();
        prop_assert!(two_steps.relative_distance(&one_step).unwrap() <= 1e-9);
    }

    #[test]
    fn trace_matches_evolved_field_at_origin(c in -3.0f64..3.0, w in 0.8f64..2.0, k in -3.0f64..3.0, t in -1.0f64..1.0) {
        let u0 = packet(grid(), c, w, k);
        let times = UniformGrid::new(t, 1.0, 2).unwrap();
        let tr = origin_trace(&u0, &times).unwrap();
        let u = evolve(&u0, t).unwrap();
        let origin = grid().node_of(0.0).unwrap();
        prop_assert!((tr.values[0] - u.values()[origin]).norm() <= 1e-6, "{} vs {}", tr.values[0], u.values()[origin]);
        prop_assert!((tr.values[0] - tr.split_i[0] - tr.split_ii[0]).norm() <= 1e-14);
    }

    #[test]
    fn kernel_modulus_is_independent_of_x(tau in prop_oneof![-2.0f64..-1e-3, 1e-3f64..2.0], x in -50.0f64..50.0) {
        let k = point_source_kernel(tau, x).unwrap();
        prop_assert!((k.norm() - 1.0 / (4.0 * std::f64::consts::PI * tau.abs()).sqrt()).abs() <= 1e-12 * k.norm());
    }
}

#[test]
fn trace_steps_shrink_under_time_refinement() {
    // e^{-|x|} lies in H^s for every s < 3/2
    let g = UniformGrid::<f64>::centered(80.0, 4096).unwrap();
    let u0 = ComplexSignal::from_real_fn(g, Axis::Space, |x: f64| (-x.abs()).exp());
    let steps: Vec<f64> = [33usize, 65, 129]
        .iter()
        .map(|&n| {
            let tr = origin_trace(&u0, &UniformGrid::spanning(0.0, 1.0, n).unwrap()).unwrap();
            tr.values.windows(2).map(|w| (w[1] - w[0]).norm()).fold(0.0, f64::max)
        })
        .collect();
    assert!(steps[1] < steps[0] && steps[2] < steps[1], "{steps:?}");
}

#[test]
fn kernel_integrates_to_one() {
    // \int K(tau, x) dx over [-L, L] by Gauss panels, plus the two-term
    // endpoint expansion of \int_L^inf e^{i a x^2} dx = e^{i a L^2}(i / 2aL + 1 / 4a^2L^3 + ...)
    let rule = GaussRule::new(8);
    for tau in [0.25, -0.25, 0.1] {
        let half = 30.0;
        let panels = 4000;
        let width = 2.0 * half / panels as f64;
        let body: Complex64 = (0..panels)
            .map(|p| {
                let a = -half + p as f64 * width;
                rule.integrate(a, a + width, |x| point_source_kernel(tau, x).unwrap())
            })
            .sum();
        let a: f64 = 1.0 / (4.0 * tau);
        let amp = point_source_kernel(tau, 0.0).unwrap();
        let phase = Complex64::cis(a * half * half);
        let one_side = if a > 0.0 {
            phase * (Complex64::new(0.0, 1.0) / (2.0 * a * half) + 1.0 / (4.0 * a * a * half.powi(3)))
        } else {
            // conjugate expansion for a < 0
            (phase.conj() * (Complex64::new(0.0, 1.0) / (2.0 * a.abs() * half) + 1.0 / (4.0 * a * a * half.powi(3)))).conj()
        };
        let total = body + amp * one_side * 2.0;
        assert!((total - 1.0).norm() < 1e-4, "tau {tau}: {total}");
    }
    assert_eq!(point_source_kernel(0.0, 0.3), Err(LabError::Singular));
}

#[test]
fn leakage_is_reported() {
    let g = UniformGrid::centered(20.0, 512).unwrap();
    let u0 = packet(g, 0.0, 0.5, 12.0);
    assert!(matches!(evolve(&u0, 1.0), Err(LabError::WindowLeakage { .. })));
    assert!(evolve(&u0, 0.0).unwrap().relative_distance(&u0).unwrap() < 1e-14);
}
