//! Numerical checks of the Sobolev estimates behind the charge equation:
//! power-law fits, ratio batteries that must stay bounded under refinement,
//! and synthesis of couplings with a prescribed regularity.

use num_complex::{Complex, Complex64};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::coupling::{CouplingKind, CouplingPath};
use crate::dyadic::phi;
use crate::error::{LabError, Result};
use crate::propagator::{from_c64, to_c64};
use crate::quadrature::{fresnel_unit, GaussRule};
use crate::scalar::Real;
use crate::signal::{dft, idft, sobolev_norm, Axis, ComplexSignal, NormOptions, UniformGrid};
use crate::wavefield::ChargeSampler;

/// Smallest `r^2` of an accepted fit.
pub const R_SQUARED_GATE: f64 = 0.98;
pub const MIN_FIT_POINTS: usize = 8;
/// `max / min` of the fitted parameter values.
pub const MIN_FIT_SPAN: f64 = 100.0;

/// Log-log least-squares fit of measured norms against a parameter.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScalingReport {
    pub parameter_values: Vec<f64>,
    pub measured_norms: Vec<f64>,
    pub fitted_exponent: f64,
    pub predicted_exponent: f64,
    pub r_squared: f64,
}

impl ScalingReport {
    /// Fits without the acceptance gate.
    pub fn fit_unchecked(parameter_values: Vec<f64>, measured_norms: Vec<f64>, predicted_exponent: f64) -> Self {
        let xs: Vec<f64> = parameter_values.iter().map(|p| p.ln()).collect();
        let ys: Vec<f64> = measured_norms.iter().map(|m| m.ln()).collect();
        let n = xs.len() as f64;
        let mx = xs.iter().sum::<f64>() / n;
        let my = ys.iter().sum::<f64>() / n;
        let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
        let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
        let syy: f64 = ys.iter().map(|y| (y - my) * (y - my)).sum();
        let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
        let ss_res: f64 = xs.iter().zip(&ys).map(|(x, y)| (y - my - slope * (x - mx)).powi(2)).sum();
        let r_squared = if syy > 0.0 { 1.0 - ss_res / syy } else { 1.0 };
        Self { parameter_values, measured_norms, fitted_exponent: slope, predicted_exponent, r_squared }
    }

    /// Fits and applies the point-count, span and `r^2` gates.
    pub fn fit(parameter_values: Vec<f64>, measured_norms: Vec<f64>, predicted_exponent: f64) -> Result<Self> {
        if parameter_values.len() != measured_norms.len() {
            return Err(LabError::Domain("parameters and norms differ in length".into()));
        }
        if parameter_values.len() < MIN_FIT_POINTS {
            return Err(LabError::Domain(format!(
                "a fit needs {MIN_FIT_POINTS} points, got {}",
                parameter_values.len()
            )));
        }
        let lo = parameter_values.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = parameter_values.iter().cloned().fold(0.0, f64::max);
        if !(lo > 0.0) || hi / lo < MIN_FIT_SPAN {
            return Err(LabError::Domain(format!("parameters span {lo:.3e}..{hi:.3e}, need two decades")));
        }
        if measured_norms.iter().any(|m| !(*m > 0.0) || !m.is_finite()) {
            return Err(LabError::Domain("norms must be positive and finite for a log-log fit".into()));
        }
        let r = Self::fit_unchecked(parameter_values, measured_norms, predicted_exponent);
        if r.r_squared < R_SQUARED_GATE {
            return Err(LabError::FitRejected { r_squared: r.r_squared, threshold: R_SQUARED_GATE });
        }
        Ok(r)
    }

    pub fn exponent_error(&self) -> f64 {
        (self.fitted_exponent - self.predicted_exponent).abs()
    }

    pub fn write_csv<W: std::io::Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "parameter,norm")?;
        for (p, m) in self.parameter_values.iter().zip(&self.measured_norms) {
            writeln!(w, "{p},{m}")?;
        }
        Ok(())
    }
}

/// `n` log-spaced values in `[lo, hi]`.
pub fn log_spaced(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    (0..n).map(|k| lo * (hi / lo).powf(k as f64 / (n - 1) as f64)).collect()
}

// ---------------------------------------------------------------------------
// Indicator functions

/// `|F 1_[0,g]|^2 = 4 sin^2(g tau / 2) / tau^2`.
fn indicator_energy(g: f64, tau: f64) -> f64 {
    if tau == 0.0 {
        return g * g;
    }
    let s = (0.5 * g * tau).sin();
    4.0 * s * s / (tau * tau)
}

/// `||1_[0,g]||_{H^nu}` by Gauss panels in `sigma = g tau` plus the averaged tail.
fn indicator_sobolev_norm(g: f64, nu: f64) -> f64 {
    let rule = GaussRule::new(16);
    let sigma_max = 4000.0;
    let panels = 4000;
    let width = sigma_max / panels as f64;
    // (1/pi) \int_0^inf (1 + tau^2)^nu energy dtau, tau = sigma / g
    let body: f64 = (0..panels)
        .map(|p| {
            let a = p as f64 * width;
            rule.integrate_real(a, a + width, |s| {
                let tau = s / g;
                (1.0 + tau * tau).powf(nu) * indicator_energy(g, tau) / g
            })
        })
        .sum();
    // beyond sigma_max: sin^2 -> 1/2, (1 + tau^2)^nu -> tau^{2 nu}
    let tail = 2.0 * g.powf(1.0 - 2.0 * nu) * sigma_max.powf(2.0 * nu - 1.0) / (1.0 - 2.0 * nu);
    ((body + tail) / std::f64::consts::PI).sqrt()
}

pub fn default_gaps() -> Vec<f64> {
    log_spaced(1e-3, 1e-1, 12)
}

/// `||1_[0,t] - 1_[0,t']||_{H^nu}` against `|t - t'|` for `t' = 1/2`.
///
/// The difference is the indicator of `[t', t]`; its transform is closed-form
/// and the frequency integral is done by quadrature.
pub fn cutoff_scaling(nu: f64, gaps: &[f64]) -> Result<ScalingReport> {
    if !(0.0..0.5).contains(&nu) {
        return Err(LabError::Domain(format!("cut-off scaling needs 0 <= nu < 1/2, got {nu}")));
    }
    if gaps.iter().any(|g| !(*g > 0.0 && *g <= 1.0)) {
        return Err(LabError::Domain("gaps must lie in (0, 1]".into()));
    }
    let norms: Vec<f64> = gaps.par_iter().map(|&g| indicator_sobolev_norm(g, nu)).collect();
    ScalingReport::fit(gaps.to_vec(), norms, 0.5 - nu)
}

/// Squared `B^{1/2}_{2,inf}` norms of `1_[0,t]` and their affine envelope.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundednessReport {
    pub t_values: Vec<f64>,
    pub squared_norms: Vec<f64>,
    /// `max_t norm^2 / (1 + |t|)`.
    pub envelope_constant: f64,
    /// Slope of `log norm^2` against `log(1 + |t|)`, with the envelope exponent 1.
    pub fit: ScalingReport,
}

impl BoundednessReport {
    /// Every point lies below `C (1 + |t|)` and the growth is at most affine.
    pub fn within_envelope(&self, slack: f64) -> bool {
        self.fit.fitted_exponent <= self.fit.predicted_exponent + slack
            && self
                .t_values
                .iter()
                .zip(&self.squared_norms)
                .all(|(t, m)| *m <= self.envelope_constant * (1.0 + t.abs()) * (1.0 + 1e-12))
    }
}

/// `2^q ||Delta_q 1_[0,t]||^2` for `q = -1, 0, ..., q_top`.
pub fn indicator_block_energies(t: f64, q_top: i32) -> Vec<f64> {
    let rule = GaussRule::new(16);
    (-1..=q_top)
        .map(|q| {
            let scale = 2f64.powi(q.max(0));
            let (lo, hi) = if q < 0 { (0.0, 4.0 / 3.0) } else { (scale, scale * 8.0 / 3.0) };
            let profile = |tau: f64| if q < 0 { crate::dyadic::chi(tau) } else { phi(tau / scale) };
            // resolve sin^2(t tau / 2) across the annulus; once it oscillates
            // thousands of times its mean 1/2 is used instead
            let cycles = (hi - lo) * t.abs() / std::f64::consts::TAU;
            let averaged = cycles > 2000.0;
            let panels = if averaged { 64 } else { ((cycles * 4.0).ceil() as usize).max(8) };
            let width = (hi - lo) / panels as f64;
            let e: f64 = (0..panels)
                .map(|p| {
                    let a = lo + p as f64 * width;
                    rule.integrate_real(a, a + width, |tau| {
                        let energy = if averaged { 2.0 / (tau * tau) } else { indicator_energy(t, tau) };
                        profile(tau).powi(2) * energy
                    })
                })
                .sum();
            // both signs of tau, 1/(2 pi)
            2f64.powi(q) * e / std::f64::consts::PI
        })
        .collect()
}

pub fn besov_halfnorm_boundedness(t_values: &[f64]) -> Result<BoundednessReport> {
    if t_values.is_empty() {
        return Err(LabError::Domain("no t values".into()));
    }
    let squared: Vec<f64> = t_values
        .par_iter()
        .map(|&t| indicator_block_energies(t, 30).into_iter().fold(0.0, f64::max))
        .collect();
    let envelope_constant = t_values.iter().zip(&squared).map(|(t, m)| m / (1.0 + t.abs())).fold(0.0, f64::max);
    let ones: Vec<f64> = t_values.iter().map(|t| 1.0 + t.abs()).collect();
    let fit = ScalingReport::fit_unchecked(ones, squared.clone(), 1.0);
    Ok(BoundednessReport { t_values: t_values.to_vec(), squared_norms: squared, envelope_constant, fit })
}

// ---------------------------------------------------------------------------
// Dilation

/// Fits `||chi(./T)||_{H^mu}` over `T`; each `T` gets its own grid of width `4 support T`.
pub fn dilation_scaling_check(
    profile: impl Fn(f64) -> f64 + Sync,
    support: f64,
    t_values: &[f64],
    mu: f64,
) -> Result<ScalingReport> {
    if mu < 0.0 {
        return Err(LabError::Domain(format!("dilation check needs mu >= 0, got {mu}")));
    }
    if t_values.iter().any(|t| !(*t > 0.0 && *t <= 1.0)) {
        return Err(LabError::Domain("dilation factors must lie in (0, 1]".into()));
    }
    let norms = t_values
        .par_iter()
        .map(|&t| {
            let grid = UniformGrid::<f64>::centered(4.0 * support * t, 1024)?;
            let f = ComplexSignal::from_real_fn(grid, Axis::Space, |x| profile(x / t));
            sobolev_norm(&f, mu, NormOptions::strict())
        })
        .collect::<Result<Vec<_>>>()?;
    ScalingReport::fit(t_values.to_vec(), norms, 0.5 - mu)
}

pub fn default_dilations() -> Vec<f64> {
    log_spaced(1e-3, 1e-1, 10)
}

// ---------------------------------------------------------------------------
// Change of variables and origin trace

/// `lhs = ||F^{-1}[F f(-xi^2)]||_{H^s}`, `rhs = ||f||_{H^{(2s-1)/4}}`.
///
/// `f` is read as the piecewise-linear interpolant of its samples; its grid
/// must contain `t = 0` and have a power-of-two count.
pub fn chgvar_check<T: Real>(f: &ComplexSignal<T>, horizon: T, s: T) -> Result<(T, T)> {
    let grid = *f.grid();
    let peak = f.sup_norm();
    if peak == T::zero() {
        return Ok((T::zero(), T::zero()));
    }
    for (t, v) in grid.points().zip(f.values()) {
        if t.abs() > horizon * (T::one() + T::lit(1e-12)) && v.norm() > T::lit(1e-8) * peak {
            return Err(LabError::SupportViolation { ratio: (v.norm() / peak).to_f64_lossy(), floor: 1e-8 });
        }
    }
    let sampler = ChargeSampler::new(&grid, f.values())?;
    let (t_lo, t_hi) = (grid.start().to_f64_lossy(), grid.last().to_f64_lossy());
    let transform = |omega: f64| sampler.fourier_integral(omega, t_hi) - sampler.fourier_integral(omega, t_lo);
    let sf = s.to_f64_lossy();
    let h = grid.step().to_f64_lossy();
    let reach = t_hi.abs().max(t_lo.abs());
    let omega_max = std::f64::consts::PI / h;
    let rule = GaussRule::new(8);
    // xi in [0, 1], then omega = xi^2 in [1, omega_max] with d xi = d omega / (2 sqrt omega)
    let low = rule.integrate_real(0.0, 1.0, |xi| (1.0 + xi * xi).powf(sf) * transform(xi * xi).norm_sqr());
    let width = 0.5 / reach;
    let panels = ((omega_max - 1.0) / width).ceil().max(1.0) as usize;
    let width = (omega_max - 1.0) / panels as f64;
    // panels are summed in order so the result does not depend on the thread count
    let high: f64 = (0..panels)
        .into_par_iter()
        .map(|p| {
            let a = 1.0 + p as f64 * width;
            rule.integrate_real(a, a + width, |w| {
                let xi2 = w;
                (1.0 + xi2).powf(sf) * transform(w).norm_sqr() / (2.0 * w.sqrt())
            })
        })
        .collect::<Vec<f64>>()
        .iter()
        .sum();
    // both signs of xi, 1/(2 pi)
    let lhs = ((low + high) / std::f64::consts::PI).sqrt();
    let rhs = sobolev_norm(f, (T::lit(2.0) * s - T::one()) / T::lit(4.0), NormOptions::lenient())?;
    Ok((T::lit(lhs), rhs))
}

/// `lhs = ||II||_{H^nu}`, `rhs = ||u0||_{H^{2 nu - 1/2}}`.
///
/// `||II||^2_{H^nu} = (1/4 pi) \int_1^inf (1 + xi^4)^nu |u0(xi) + u0(-xi)|^2 / xi dxi`,
/// evaluated by the trapezoid rule on the transform grid of `u0`.
pub fn trace_bound_check<T: Real>(u0: &ComplexSignal<T>, nu: T) -> Result<(T, T)> {
    let spec = dft(&u0.cast::<f64>())?;
    let n = spec.values().len();
    let dxi = spec.frequency_grid().step();
    let mid = n / 2;
    let nuf = nu.to_f64_lossy();
    let mut acc = 0.0;
    for k in 1..mid {
        let xi = k as f64 * dxi;
        if xi <= 1.0 {
            continue;
        }
        let hsum = spec.values()[mid + k] + spec.values()[mid - k];
        acc += (1.0 + xi.powi(4)).powf(nuf) * hsum.norm_sqr() / xi * dxi;
    }
    let lhs = (acc / (4.0 * std::f64::consts::PI)).sqrt();
    let rhs = sobolev_norm(u0, T::lit(2.0) * nu - T::lit(0.5), NormOptions::lenient())?;
    Ok((T::lit(lhs), rhs))
}

/// `||e^{i(t+d)Delta} u0 - e^{it Delta} u0||` directly and by
/// `((1/2 pi) \int 4 sin^2(d xi^2 / 2) |u0(xi)|^2)^{1/2}`.
pub fn free_continuity_modulus<T: Real>(u0: &ComplexSignal<T>, t: T, d: T) -> Result<(T, T)> {
    let a = crate::propagator::evolve_unchecked(u0, t)?;
    let b = crate::propagator::evolve_unchecked(u0, t + d)?;
    let direct = b.sub(&a)?.l2_norm();
    let spec = dft(&u0.cast::<f64>())?;
    let df = d.to_f64_lossy();
    let dxi = spec.frequency_grid().step();
    let e: f64 = spec
        .values()
        .iter()
        .enumerate()
        .map(|(k, v)| {
            let xi = spec.frequency(k);
            4.0 * (0.5 * df * xi * xi).sin().powi(2) * v.norm_sqr()
        })
        .sum::<f64>()
        * dxi
        / std::f64::consts::TAU;
    Ok((direct, T::lit(e.sqrt())))
}

// ---------------------------------------------------------------------------
// Smoothing estimate

/// `\int_0^T e^{-i tau r} r^{-1/2} dr` in closed form.
fn abel_symbol(tau: f64, horizon: f64) -> Complex64 {
    if tau == 0.0 {
        return Complex64::new(2.0 * horizon.sqrt(), 0.0);
    }
    let a = tau.abs();
    let e = fresnel_unit((a * horizon).sqrt()) * (2.0 / a.sqrt());
    if tau > 0.0 {
        e.conj()
    } else {
        e
    }
}

/// Both sides of the smoothing estimate for `L` with kernels truncated to `[0, T]`, `[-T, 0]`:
///
/// `||L q||_{H^s} <= C (T^{1/2} ||1_{[-1,1]}(D) q||_{L^2}
///     + T^{1/2 - theta} (||q 1_[0,T]||_{H^{s-theta}} + ||q 1_[-T,0]||_{H^{s-theta}}))`.
///
/// The low-frequency cut is sharp. Returns one `(lhs, rhs)` pair per `theta`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SmoothingSides {
    pub theta: f64,
    pub lhs: f64,
    pub rhs: f64,
}

impl SmoothingSides {
    pub fn ratio(&self) -> f64 {
        if self.rhs > 0.0 {
            self.lhs / self.rhs
        } else {
            0.0
        }
    }
}

pub fn smoothing_check<T: Real>(
    q: &ComplexSignal<T>,
    horizon: T,
    s: f64,
    thetas: &[f64],
) -> Result<Vec<SmoothingSides>> {
    let grid = *q.grid();
    let th = horizon.to_f64_lossy();
    let peak = q.sup_norm();
    for (t, v) in grid.points().zip(q.values()) {
        if t.abs() > horizon * (T::one() + T::lit(1e-12)) && v.norm() > T::lit(1e-8) * peak {
            return Err(LabError::SupportViolation { ratio: (v.norm() / peak).to_f64_lossy(), floor: 1e-8 });
        }
    }
    for &theta in thetas {
        if !(0.0..=0.5).contains(&theta) {
            return Err(LabError::Domain(format!("theta must lie in [0, 1/2], got {theta}")));
        }
        if s - theta >= 0.5 {
            return Err(LabError::Domain(format!("H^{} of a cut-off charge is infinite", s - theta)));
        }
    }
    if s >= 1.0 {
        return Err(LabError::Domain(format!("smoothing check is set up for s < 1, got {s}")));
    }
    let sampler = ChargeSampler::new(&grid, q.values())?;
    let q0 = sampler.value(0.0);
    let qt = (sampler.value(th), sampler.value(-th));
    let h = grid.step().to_f64_lossy();
    let tau_max = std::f64::consts::PI / h;
    let panels = (2.0 * tau_max / (std::f64::consts::PI / (2.0 * th))).ceil() as usize;
    let width = 2.0 * tau_max / panels as f64;
    let rule = GaussRule::new(8);
    let sqrt_pi = std::f64::consts::PI.sqrt();
    let fwd = Complex64::cis(-std::f64::consts::FRAC_PI_4);
    let bwd = Complex64::cis(std::f64::consts::FRAC_PI_4);
    // integrands per node: lhs, low band, and |F+|^2, |F-|^2 with their tau
    let samples: Vec<(f64, f64, f64, f64, f64)> = (0..panels)
        .into_par_iter()
        .flat_map_iter(|p| {
            let a = -tau_max + p as f64 * width;
            let (nodes, weights) = (rule.nodes(), rule.weights());
            let sampler = &sampler;
            nodes.iter().zip(weights).map(move |(x, w)| {
                let tau = a + 0.5 * width * (x + 1.0);
                let wt = 0.5 * width * w;
                let fp = sampler.fourier_integral(-tau, th);
                let fm = -sampler.fourier_integral(-tau, -th);
                let lq = sqrt_pi * (fwd * abel_symbol(tau, th) * fp - bwd * abel_symbol(-tau, th) * fm);
                (tau, wt, lq.norm_sqr(), fp.norm_sqr(), fm.norm_sqr())
            }).collect::<Vec<_>>()
        })
        .collect();
    let tau_pi = std::f64::consts::TAU;
    let lhs2: f64 = samples.iter().map(|e| e.1 * (1.0 + e.0 * e.0).powf(s) * e.2).sum::<f64>() / tau_pi;
    // the sharp low band uses the same nodes restricted to |tau| <= 1, refined separately
    let low_rule = GaussRule::new(32);
    let low2 = low_rule.integrate_real(-1.0, 1.0, |tau| {
        (sampler.fourier_integral(-tau, th) - sampler.fourier_integral(-tau, -th)).norm_sqr()
    }) / tau_pi;
    let low = low2.sqrt();
    let mut out = Vec::with_capacity(thetas.len());
    for &theta in thetas {
        let sig = s - theta;
        let body = |sel: fn(&(f64, f64, f64, f64, f64)) -> f64| -> f64 {
            samples.iter().map(|e| e.1 * (1.0f64 + e.0 * e.0).powf(sig) * sel(e)).sum::<f64>() / tau_pi
        };
        // tails beyond the band: |F|^2 ~ (|q(0)|^2 + |q(+-T)|^2) / tau^2 averaged
        let tail = |edge: Complex64| -> f64 {
            (q0.norm_sqr() + edge.norm_sqr()) * tau_max.powf(2.0 * sig - 1.0) / (1.0 - 2.0 * sig) / std::f64::consts::PI
        };
        let plus = (body(|e| e.3) + tail(qt.0)).sqrt();
        let minus = (body(|e| e.4) + tail(qt.1)).sqrt();
        let rhs = th.sqrt() * low + th.powf(0.5 - theta) * (plus + minus);
        out.push(SmoothingSides { theta, lhs: lhs2.sqrt(), rhs });
    }
    Ok(out)
}

/// Random charge `sum_k c_k sin(k pi (t + T) / 2T)` on `[-T, T]` with `c_k ~ N(0, 1) / k`.
pub fn random_supported_charge(horizon: f64, nodes: usize, modes: usize, seed: u64) -> Result<ComplexSignal<f64>> {
    let grid = UniformGrid::spanning(-horizon, horizon, nodes)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let coefs: Vec<Complex64> = (1..=modes)
        .map(|k| {
            let re: f64 = StandardNormal.sample(&mut rng);
            let im: f64 = StandardNormal.sample(&mut rng);
            Complex64::new(re, im) / k as f64
        })
        .collect();
    Ok(ComplexSignal::from_fn(grid, Axis::Time, |t| {
        let arg = std::f64::consts::PI * (t + horizon) / (2.0 * horizon);
        coefs.iter().enumerate().map(|(k, c)| c * ((k + 1) as f64 * arg).sin()).sum()
    }))
}

/// Maximum smoothing ratio per `theta` over a battery of random charges.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SmoothingBattery {
    pub nodes: usize,
    pub thetas: Vec<f64>,
    pub max_ratio: Vec<f64>,
}

pub fn smoothing_battery(samples: usize, nodes: usize, s: f64, thetas: &[f64], seed: u64) -> Result<SmoothingBattery> {
    let mut max_ratio = vec![0.0f64; thetas.len()];
    for k in 0..samples {
        let q = random_supported_charge(1.0, nodes, 12, seed.wrapping_add(k as u64))?;
        for (m, side) in max_ratio.iter_mut().zip(smoothing_check(&q, 1.0, s, thetas)?) {
            *m = m.max(side.ratio());
        }
    }
    Ok(SmoothingBattery { nodes, thetas: thetas.to_vec(), max_ratio })
}

// ---------------------------------------------------------------------------
// Random band-limited signals and ratio batteries

/// Random signal whose Fourier coefficients are `N(0,1) (1 + xi^2)^{-decay/2}`
/// on `|k| <= count/4`, drawn in the order `0, 1, -1, 2, -2, ...`, so a refined
/// grid keeps every coefficient of the coarse one.
pub fn random_band_limited(grid: UniformGrid<f64>, decay: f64, seed: u64) -> Result<ComplexSignal<f64>> {
    let n = grid.count();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dxi = grid.frequency_step();
    let kmax = (n / 4) as i64;
    let mut spec = dft(&ComplexSignal::zeros(grid, Axis::Space))?;
    let mid = (n / 2) as i64;
    for j in 0..=2 * kmax {
        let k = if j % 2 == 1 { (j + 1) / 2 } else { -(j / 2) };
        let re: f64 = StandardNormal.sample(&mut rng);
        let im: f64 = StandardNormal.sample(&mut rng);
        let xi = k as f64 * dxi;
        spec.values_mut()[(mid + k) as usize] = Complex64::new(re, im) * (1.0 + xi * xi).powf(-decay / 2.0);
    }
    idft(&spec)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RatioBattery {
    pub label: String,
    pub count: usize,
    pub max: f64,
    pub median: f64,
}

impl RatioBattery {
    pub fn from_ratios(label: impl Into<String>, count: usize, mut ratios: Vec<f64>) -> Self {
        ratios.sort_by(f64::total_cmp);
        let max = ratios.last().copied().unwrap_or(0.0);
        let median = if ratios.is_empty() { 0.0 } else { ratios[ratios.len() / 2] };
        Self { label: label.into(), count, max, median }
    }

    /// Relative change of the maximum against a battery on a refined grid.
    pub fn drift(&self, refined: &Self) -> f64 {
        if self.max == 0.0 {
            return 0.0;
        }
        (refined.max - self.max).abs() / self.max
    }
}

/// `B^s_{2,2}`-over-`H^s` ratios on random band-limited signals.
pub fn besov_sobolev_battery(s: f64, samples: usize, grid: UniformGrid<f64>, seed: u64) -> Result<RatioBattery> {
    let p = crate::dyadic::build_partition(&grid)?;
    let idx = crate::dyadic::BesovIndex::sobolev(s);
    let ratios = (0..samples)
        .map(|k| {
            let f = random_band_limited(grid, 1.0, seed.wrapping_add(k as u64))?;
            let b = crate::dyadic::besov_norm(&f, idx, &p)?;
            let h = sobolev_norm(&f, s, NormOptions::lenient())?;
            Ok(b / h)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(RatioBattery::from_ratios(format!("B^{s}_22 / H^{s}"), grid.count(), ratios))
}

pub fn product_law_battery(
    law: crate::dyadic::ProductLaw,
    samples: usize,
    grid: UniformGrid<f64>,
    seed: u64,
) -> Result<RatioBattery> {
    law.validate()?;
    let p = crate::dyadic::build_partition(&grid)?;
    let ratios = (0..samples)
        .into_par_iter()
        .map(|k| {
            let base = seed.wrapping_add(2 * k as u64);
            let u = random_band_limited(grid, 1.5, base)?;
            let v = random_band_limited(grid, 1.5, base + 1)?;
            crate::dyadic::product_law_ratio(&u, &v, law, &p)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(RatioBattery::from_ratios(format!("{law:?}"), grid.count(), ratios))
}

/// `C` bracketing `lhs / rhs` in `[C^{-k}, C^k]` over random signals and blocks.
pub fn bernstein_battery(
    line: crate::dyadic::BernsteinLine,
    k: u32,
    a: f64,
    b: f64,
    samples: usize,
    grid: UniformGrid<f64>,
    seed: u64,
) -> Result<RatioBattery> {
    let p = crate::dyadic::build_partition(&grid)?;
    let mut ratios = Vec::new();
    for j in 0..samples {
        let f = random_band_limited(grid, 1.0, seed.wrapping_add(j as u64))?;
        for q in 1..=p.q_max() {
            let (l, r) = crate::dyadic::bernstein_check(&f, &p, line, q, k, a, b)?;
            if r > 0.0 {
                ratios.push(l / r);
            }
        }
    }
    Ok(RatioBattery::from_ratios(format!("{line:?} k={k} a={a} b={b}"), grid.count(), ratios))
}

/// Random `u0 = sum_k c_k e^{-(x - x_k)^2 / 2 w_k^2} e^{i p_k x}`: smooth and well inside the window.
pub fn random_initial_datum(grid: UniformGrid<f64>, seed: u64) -> ComplexSignal<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let half = 0.5 * grid.length();
    let bumps: Vec<(Complex64, f64, f64, f64)> = (0..4)
        .map(|_| {
            let n = |r: &mut ChaCha8Rng| -> f64 { StandardNormal.sample(r) };
            let c = Complex64::new(n(&mut rng), n(&mut rng));
            let x0 = 0.1 * half * n(&mut rng);
            let w = 0.5 + 0.5 * n(&mut rng).abs();
            let p = 3.0 * n(&mut rng);
            (c, x0, w, p)
        })
        .collect();
    ComplexSignal::from_fn(grid, Axis::Space, |x| {
        bumps
            .iter()
            .map(|(c, x0, w, p)| c * (-(x - x0).powi(2) / (2.0 * w * w)).exp() * Complex64::cis(p * x))
            .sum()
    })
}

pub fn trace_bound_battery(nu: f64, samples: usize, grid: UniformGrid<f64>, seed: u64) -> Result<RatioBattery> {
    let ratios = (0..samples)
        .map(|k| {
            let u0 = random_initial_datum(grid, seed.wrapping_add(k as u64));
            let (l, r) = trace_bound_check(&u0, nu)?;
            Ok(l / r)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(RatioBattery::from_ratios(format!("trace II H^{nu}"), grid.count(), ratios))
}

/// Smooth charge supported in `[-T, T]`: random bumps times `cos^2` ramps.
pub fn random_window_charge(horizon: f64, grid: UniformGrid<f64>, seed: u64) -> ComplexSignal<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = |r: &mut ChaCha8Rng| -> f64 { StandardNormal.sample(r) };
    let coefs: Vec<(Complex64, f64)> = (0..6).map(|_| (Complex64::new(n(&mut rng), n(&mut rng)), 4.0 * n(&mut rng))).collect();
    ComplexSignal::from_fn(grid, Axis::Time, |t| {
        if t.abs() >= horizon {
            return Complex64::new(0.0, 0.0);
        }
        let w = (std::f64::consts::FRAC_PI_2 * t / horizon).cos().powi(4);
        coefs.iter().map(|(c, p)| c * Complex64::cis(p * t)).sum::<Complex64>() * w
    })
}

pub fn chgvar_battery(s: f64, samples: usize, grid: UniformGrid<f64>, horizon: f64, seed: u64) -> Result<RatioBattery> {
    let ratios = (0..samples)
        .map(|k| {
            let f = random_window_charge(horizon, grid, seed.wrapping_add(k as u64));
            let (l, r) = chgvar_check(&f, horizon, s)?;
            Ok(l / r)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(RatioBattery::from_ratios(format!("chgvar s={s}"), grid.count(), ratios))
}

// ---------------------------------------------------------------------------
// Coupling synthesis

/// Regularity offset `delta` in the coefficient decay `(1 + k^2)^{-(nu + 1/2 + delta)/2}`.
pub const SYNTHESIS_DELTA: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SynthesisOptions {
    /// Samples on `[-support, support]`; a power of two.
    pub samples: usize,
    pub offset: f64,
    /// Scale of the random part (its standard deviation on the window).
    pub amplitude: f64,
}

impl Default for SynthesisOptions {
    fn default() -> Self {
        Self { samples: 16384, offset: 0.0, amplitude: 1.0 }
    }
}

pub fn synthesize_alpha<T: Real>(nu: f64, seed: u64, support: f64) -> Result<CouplingPath<T>> {
    synthesize_alpha_with(nu, seed, support, SynthesisOptions::default())
}

/// `alpha(t) = offset + amplitude * g(t)` with
/// `g = sum_k w_k (a_k cos(omega_k t) + b_k sin(omega_k t)) / (sum w_k^2)^{1/2}`,
/// `omega_k = pi k / support` and `w_k = (1 + omega_k^2)^{-(nu + 1/2 + delta)/2}`.
///
/// The horizon is `2 support`, so `alpha_T` vanishes at the window edges.
/// Coefficients are drawn mode by mode: more samples only add modes.
pub fn synthesize_alpha_with<T: Real>(nu: f64, seed: u64, support: f64, opts: SynthesisOptions) -> Result<CouplingPath<T>> {
    if !(nu > 0.0) {
        return Err(LabError::Domain(format!("synthesis needs nu > 0, got {nu}")));
    }
    if !opts.samples.is_power_of_two() {
        return Err(LabError::NotPowerOfTwo(opts.samples));
    }
    if !(support > 0.0) {
        return Err(LabError::Domain(format!("support must be positive, got {support}")));
    }
    let n = opts.samples;
    let grid = UniformGrid::<f64>::new(-support, 2.0 * support / n as f64, n)?;
    let modes = n / 2;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let expo = -(nu + 0.5 + SYNTHESIS_DELTA) / 2.0;
    let mut spec = dft(&ComplexSignal::zeros(grid, Axis::Time))?;
    let mid = n / 2;
    let mut norm2 = 0.0;
    let dxi = grid.frequency_step();
    for k in 1..modes {
        let a: f64 = StandardNormal.sample(&mut rng);
        let b: f64 = StandardNormal.sample(&mut rng);
        let omega = k as f64 * dxi;
        let w = (1.0 + omega * omega).powf(expo);
        norm2 += w * w;
        // a cos + b sin = ((a - ib) e^{i omega t} + (a + ib) e^{-i omega t}) / 2
        let z = Complex64::new(a, -b) * (0.5 * w);
        // samples of e^{i omega t} have transform `length` at +omega
        let scale = grid.length();
        spec.values_mut()[mid + k] = z * scale;
        spec.values_mut()[mid - k] = z.conj() * scale;
    }
    let g = idft(&spec)?;
    let inv = if norm2 > 0.0 { opts.amplitude / norm2.sqrt() } else { 0.0 };
    let values: Vec<Complex<T>> = g.values().iter().map(|v| from_c64(Complex64::new(opts.offset + inv * v.re, 0.0))).collect();
    let samples = ComplexSignal::new(grid.cast::<T>(), values, Axis::Time)?;
    CouplingPath::from_samples(CouplingKind::Synthesized, samples, T::lit(2.0 * support), T::lit(nu))
}

/// Refinement trend of a synthesized coupling's Sobolev norms.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegularityCertificate {
    pub nu: f64,
    pub samples: Vec<usize>,
    /// `||alpha_T - offset chi||_{H^nu}` per refinement.
    pub norms_at_nu: Vec<f64>,
    /// Same in `H^{nu + 0.25}`.
    pub norms_above: Vec<f64>,
}

impl RegularityCertificate {
    /// Largest relative change of the `H^nu` norm between refinements.
    pub fn stability(&self) -> f64 {
        self.norms_at_nu.windows(2).map(|w| (w[1] - w[0]).abs() / w[0]).fold(0.0, f64::max)
    }

    /// Smallest growth factor of the `H^{nu + 0.25}` norm between refinements.
    pub fn growth(&self) -> f64 {
        self.norms_above.windows(2).map(|w| w[1] / w[0]).fold(f64::INFINITY, f64::min)
    }
}

pub fn certify_regularity(nu: f64, seed: u64, support: f64, base_samples: usize, levels: usize) -> Result<RegularityCertificate> {
    let mut samples = Vec::new();
    let mut at_nu = Vec::new();
    let mut above = Vec::new();
    for l in 0..levels {
        let n = base_samples << l;
        let opts = SynthesisOptions { samples: n, ..SynthesisOptions::default() };
        let a = synthesize_alpha_with::<f64>(nu, seed, support, opts)?;
        let sig = a.truncated_signal(a.samples().grid());
        samples.push(n);
        at_nu.push(sobolev_norm(&sig, nu, NormOptions::lenient())?);
        above.push(sobolev_norm(&sig, nu + 0.25, NormOptions::lenient())?);
    }
    Ok(RegularityCertificate { nu, samples, norms_at_nu: at_nu, norms_above: above })
}

/// `max |alpha(t + d) - alpha(t)|` over the samples for `d = step * lag`.
pub fn modulus_of_continuity<T: Real>(alpha: &CouplingPath<T>, lag: usize) -> f64 {
    let v = alpha.samples().values();
    (0..v.len().saturating_sub(lag)).map(|k| to_c64(v[k + lag] - v[k]).norm()).fold(0.0, f64::max)
}
