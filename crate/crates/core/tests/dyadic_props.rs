use delta_lab::dyadic::*;
use delta_lab::regularity::{besov_sobolev_battery, bernstein_battery, random_band_limited};
use delta_lab::signal::{apply_multiplier, sobolev_norm, ComplexSignal, NormOptions, UniformGrid};
use num_complex::Complex64;
use proptest::prelude::*;

/// Global Bernstein constant, frozen from the calibration battery (largest block ratio 1.75).
const BERNSTEIN_C: f64 = 2.0;

fn in_band(grid: UniformGrid<f64>, seed: u64) -> (ComplexSignal<f64>, DyadicPartition<f64>) {
    let p = build_partition(&grid).unwrap();
    let band = p.resolved_band() / 2.0;
    let f = random_band_limited(grid, 1.0, seed).unwrap();
    let f = apply_multiplier(&f, |xi| Complex64::new(if xi.abs() <= band { 1.0 } else { 0.0 }, 0.0)).unwrap();
    (f, p)
}

fn grids() -> impl Strategy<Value = UniformGrid<f64>> {
    (9u32..12, 10.0f64..70.0).prop_map(|(e, l)| UniformGrid::centered(l, 1usize << e).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn partition_of_unity(grid in grids()) {
        prop_assert!(build_partition(&grid).unwrap().unity_residual() <= 1e-10);
    }

    #[test]
    fn blocks_reconstruct_the_signal(grid in grids(), seed in any::<u64>()) {
        let (f, p) = in_band(grid, seed);
        let d = decompose(&f, &p).unwrap();
        prop_assert!(d.reconstruct().relative_distance(&f).unwrap() <= 1e-8);
    }

    #[test]
    fn bony_parts_sum_to_the_product(grid in grids(), seed in any::<u64>()) {
        let (u, p) = in_band(grid, seed);
        let (v, _) = in_band(grid, seed ^ 0x5555);
        let parts = bony_decompose(&u, &v, &p).unwrap();
        prop_assert!(parts.sum().relative_distance(&u.mul(&v).unwrap()).unwrap() <= 1e-8);
    }

    #[test]
    fn besov_two_two_is_equivalent_to_sobolev(grid in grids(), seed in any::<u64>(), s in -1.0f64..1.0) {
        let (f, p) = in_band(grid, seed);
        let b = besov_norm(&f, BesovIndex::sobolev(s), &p).unwrap();
        let h = sobolev_norm(&f, s, NormOptions::lenient()).unwrap();
        // the squared symbols of a smooth partition sum to a value in [1/2, 1]
        let r = b / h;
        let spread = (1.0f64 + (8.0f64 / 3.0).powi(2)).powf(s.abs() / 2.0);
        prop_assert!(r <= spread * (1.0 + 1e-12) && r >= std::f64::consts::FRAC_1_SQRT_2 / spread, "ratio {}", r);
    }

    #[test]
    fn bernstein_ratios_stay_in_the_frozen_bracket(grid in grids(), seed in any::<u64>(), k in 1u32..3) {
        let (f, p) = in_band(grid, seed);
        for q in 1..=p.q_max() {
            let (l, r) = bernstein_check(&f, &p, BernsteinLine::Block, q, k, 2.0, 2.0).unwrap();
            if r > 1e-12 {
                let ratio = l / r;
                prop_assert!(ratio <= BERNSTEIN_C.powi(k as i32) && ratio >= BERNSTEIN_C.powi(-(k as i32)), "block {} ratio {}", q, ratio);
            }
            let (l, r) = bernstein_check(&f, &p, BernsteinLine::LowPass, q, k, 2.0, f64::INFINITY).unwrap();
            if r > 1e-12 {
                prop_assert!(l / r <= BERNSTEIN_C.powi(k as i32), "low-pass {} ratio {}", q, l / r);
            }
        }
    }
}

#[test]
fn besov_over_sobolev_is_grid_stable() {
    let a = besov_sobolev_battery(0.0, 100, UniformGrid::centered(40.0, 1024).unwrap(), 3).unwrap();
    let b = besov_sobolev_battery(0.0, 100, UniformGrid::centered(40.0, 2048).unwrap(), 3).unwrap();
    assert!(a.max <= 1.0 && a.median >= std::f64::consts::FRAC_1_SQRT_2, "{a:?}");
    assert!(a.drift(&b) < 0.2, "{a:?} {b:?}");
}

#[test]
fn bernstein_battery_matches_the_frozen_constant() {
    let g = UniformGrid::centered(40.0, 1024).unwrap();
    let block = bernstein_battery(BernsteinLine::Block, 1, 2.0, 2.0, 10, g, 9).unwrap();
    assert!(block.max <= BERNSTEIN_C && block.max > 1.0, "{block:?}");
}

#[test]
fn product_law_indices_are_validated() {
    assert!(ProductLaw::A { s: 0.75 }.validate().is_err());
    assert!(ProductLaw::C { s: 0.25, s2: 0.375 }.validate().is_ok());
    assert!(ProductLaw::C { s: -0.3, s2: 0.2 }.validate().is_err());
    assert!(ProductLaw::D { s: 0.5 }.validate().is_ok());
}
