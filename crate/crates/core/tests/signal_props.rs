use delta_lab::signal::{dft, idft, sobolev_norm, Axis, ComplexSignal, NormOptions, UniformGrid};
use num_complex::Complex64;
use proptest::prelude::*;

fn signal_from(values: Vec<(f64, f64)>, length: f64) -> ComplexSignal<f64> {
    let n = values.len();
    let grid = UniformGrid::centered(length, n).unwrap();
    ComplexSignal::new(grid, values.into_iter().map(|(a, b)| Complex64::new(a, b)).collect(), Axis::Space).unwrap()
}

fn pow2_values() -> impl Strategy<Value = Vec<(f64, f64)>> {
    (4u32..10).prop_flat_map(|e| prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 1usize << e))
}

/// Smooth bump with random centre, width and chirp, well inside a window of 40.
fn bump(grid: UniformGrid<f64>, c: f64, w: f64, k: f64) -> ComplexSignal<f64> {
    ComplexSignal::from_fn(grid, Axis::Space, |x| {
        Complex64::from_polar((-(x - c).powi(2) / (2.0 * w * w)).exp(), k * x)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn parseval_holds(values in pow2_values(), length in 1.0f64..100.0) {
        let f = signal_from(values, length);
        let spec = dft(&f).unwrap();
        let lhs = f.l2_norm();
        let dxi = spec.frequency_grid().step();
        let freq_l2 = (spec.values().iter().map(|v| v.norm_sqr()).sum::<f64>() * dxi).sqrt();
        let rhs = freq_l2 / (2.0 * std::f64::consts::PI).sqrt();
        prop_assert!((spec.energy() - rhs * rhs).abs() <= 1e-10 * lhs * lhs);
        prop_assert!((lhs - rhs).abs() <= 1e-10 * lhs.max(1e-300));
    }

    #[test]
    fn dft_is_linear(values in pow2_values(), a in -3.0f64..3.0, b in -3.0f64..3.0) {
        let f = signal_from(values.clone(), 10.0);
        let g = signal_from(values.iter().rev().cloned().collect(), 10.0);
        let combo = f.scale(Complex64::new(a, 0.0)).add(&g.scale(Complex64::new(0.0, b))).unwrap();
        let lhs = dft(&combo).unwrap();
        let (sf, sg) = (dft(&f).unwrap(), dft(&g).unwrap());
        let scale = lhs.values().iter().map(|v| v.norm()).fold(1e-300, f64::max);
        for k in 0..lhs.values().len() {
            let rhs = sf.values()[k] * a + sg.values()[k] * Complex64::new(0.0, b);
            prop_assert!((lhs.values()[k] - rhs).norm() <= 1e-12 * scale);
        }
    }

    #[test]
    fn round_trip_is_identity(values in pow2_values(), length in 1.0f64..100.0) {
        let f = signal_from(values, length);
        let back = idft(&dft(&f).unwrap()).unwrap();
        prop_assert!(back.relative_distance(&f).unwrap() <= 1e-10);
    }

    #[test]
    fn sobolev_norm_is_monotone_in_s(values in pow2_values(), s in -2.0f64..2.0, ds in 0.0f64..1.0) {
        let f = signal_from(values, 20.0);
        let lo = sobolev_norm(&f, s, NormOptions::lenient()).unwrap();
        let hi = sobolev_norm(&f, s + ds, NormOptions::lenient()).unwrap();
        prop_assert!(hi >= lo * (1.0 - 1e-14));
    }

    #[test]
    fn sobolev_norm_is_grid_stable(c in -5.0f64..5.0, w in 0.7f64..2.0, k in -4.0f64..4.0, s in 0.0f64..2.0) {
        let coarse = UniformGrid::centered(40.0, 512).unwrap();
        let fine = UniformGrid::centered(40.0, 1024).unwrap();
        let a = sobolev_norm(&bump(coarse, c, w, k), s, NormOptions::strict()).unwrap();
        let b = sobolev_norm(&bump(fine, c, w, k), s, NormOptions::strict()).unwrap();
        prop_assert!((a - b).abs() <= 1e-6 * b);
    }
}

#[test]
fn indicator_sobolev_norm_matches_quadrature_oracle() {
    // (1/2pi) \int (1 + tau^2)^{1/4} |(e^{-i tau} - 1)/tau|^2 dtau, by adaptive quadrature
    let oracle = 1.331_370_0f64;
    let grid = UniformGrid::centered(8.0, 1 << 18).unwrap();
    let f = ComplexSignal::from_real_fn(grid, Axis::Time, |t| if (0.0..1.0).contains(&t) { 1.0 } else { 0.0 });
    let v: f64 = sobolev_norm(&f, 0.25, NormOptions::strict()).unwrap();
    // the sampled jump leaves a band tail of order (pi / h)^{-1/2}
    assert!((v - oracle).abs() < 5e-3 * oracle, "{v} vs {oracle}");
    let l2: f64 = sobolev_norm(&f, 0.0, NormOptions::strict()).unwrap();
    assert!((l2 - f.l2_norm()).abs() < 1e-8);
}

#[test]
fn evolved_gaussian_matches_closed_form() {
    let grid = UniformGrid::centered(60.0, 2048).unwrap();
    let u0 = bump(grid, 0.0, 1.0, 0.0);
    let t = 0.7;
    let mut spec = dft(&u0).unwrap();
    let freqs: Vec<f64> = (0..spec.values().len()).map(|k| spec.frequency(k)).collect();
    for (v, xi) in spec.values_mut().iter_mut().zip(freqs) {
        *v *= Complex64::cis(-t * xi * xi);
    }
    let u = idft(&spec).unwrap();
    let exact = ComplexSignal::from_fn(grid, Axis::Space, |x| {
        let sigma = Complex64::new(1.0, 2.0 * t);
        (1.0 / sigma).sqrt() * (-x * x / (2.0 * sigma)).exp()
    });
    assert!(u.relative_distance(&exact).unwrap() < 1e-6);
}
