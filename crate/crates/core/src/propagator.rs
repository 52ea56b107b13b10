//! Free Schrödinger group: multiplier evolution, the origin trace
//! `(e^{it Delta} u0)(0)` split into a low band `I` and a high band `II`, and the
//! point-source kernel.

use num_complex::{Complex, Complex64};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::constants::kernel_amplitude;
use crate::error::{LabError, Result};
use crate::quadrature::{filon_quadratic_moments, fresnel_unit, gauss_legendre};
use crate::scalar::{cis, Real};
use crate::signal::{apply_multiplier, dft, fft_forward, idft, ComplexSignal, SpectralSignal, UniformGrid};

/// Mass-leakage guard for finite windows.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LeakageGuard {
    /// Largest tolerated fraction of the mass inside the edge bands.
    pub limit: f64,
    /// Width of each edge band as a fraction of the window.
    pub edge_fraction: f64,
}

impl Default for LeakageGuard {
    fn default() -> Self {
        Self { limit: 1e-6, edge_fraction: 0.05 }
    }
}

impl LeakageGuard {
    pub fn disabled() -> Self {
        Self { limit: f64::INFINITY, edge_fraction: 0.05 }
    }

    /// Fraction of the mass sitting in the two edge bands.
    pub fn leaked_fraction<T: Real>(&self, u: &ComplexSignal<T>) -> f64 {
        let n = u.len();
        let band = ((n as f64) * self.edge_fraction).ceil() as usize;
        let (mut edge, mut total) = (0.0, 0.0);
        for (k, v) in u.values().iter().enumerate() {
            let m = v.norm_sqr().to_f64_lossy();
            total += m;
            if k < band || k >= n - band {
                edge += m;
            }
        }
        if total > 0.0 {
            edge / total
        } else {
            0.0
        }
    }

    pub fn check<T: Real>(&self, u: &ComplexSignal<T>) -> Result<()> {
        let leaked = self.leaked_fraction(u);
        if leaked > self.limit {
            return Err(LabError::WindowLeakage { leaked, limit: self.limit });
        }
        Ok(())
    }
}

/// `e^{it Delta} u0` without the window check.
pub fn evolve_unchecked<T: Real>(u0: &ComplexSignal<T>, t: T) -> Result<ComplexSignal<T>> {
    apply_multiplier(u0, |xi| cis(-t * xi * xi))
}

/// `e^{it Delta} u0` by the multiplier `e^{-i t xi^2}`.
pub fn evolve<T: Real>(u0: &ComplexSignal<T>, t: T) -> Result<ComplexSignal<T>> {
    evolve_with(u0, t, LeakageGuard::default())
}

pub fn evolve_with<T: Real>(u0: &ComplexSignal<T>, t: T, guard: LeakageGuard) -> Result<ComplexSignal<T>> {
    let u = evolve_unchecked(u0, t)?;
    guard.check(&u)?;
    Ok(u)
}

/// Smallest number of nodes required within `|x| <= 0.1`.
pub const ORIGIN_NODES: usize = 8;

pub(crate) fn origin_stencil<T: Real>(grid: &UniformGrid<T>) -> Result<usize> {
    let o = grid
        .node_of(T::zero())
        .ok_or_else(|| LabError::UnresolvedOrigin("space grid has no node at x = 0".into()))?;
    let near = grid.points().filter(|x| x.abs() <= T::lit(0.1)).count();
    if near < ORIGIN_NODES || o < 3 || o + 3 >= grid.count() {
        return Err(LabError::UnresolvedOrigin(format!(
            "{near} nodes within |x| <= 0.1, need {ORIGIN_NODES}"
        )));
    }
    Ok(o)
}

/// `(u'(0+), u'(0-))` from three-point one-sided stencils that skip the origin node.
pub(crate) fn one_sided_derivatives<T: Real>(u: &ComplexSignal<T>, o: usize) -> (Complex<T>, Complex<T>) {
    let v = u.values();
    let h2 = T::lit(2.0) * u.grid().step();
    let (c5, c8, c3) = (T::lit(5.0), T::lit(8.0), T::lit(3.0));
    let right = (-v[o + 1] * c5 + v[o + 2] * c8 - v[o + 3] * c3) / h2;
    let left = (v[o - 1] * c5 - v[o - 2] * c8 + v[o - 3] * c3) / h2;
    (right, left)
}

/// `u0 = smooth + c e^{-|x|}`, with `c` fixed by the measured derivative jump of `u0` at 0.
///
/// The sampled kink would otherwise be read as a band-limited function and
/// evolved with aliased phases.
#[derive(Debug, Clone, PartialEq)]
pub struct KinkSplit {
    pub c: Complex64,
    pub smooth: ComplexSignal<f64>,
}

/// Aliases `|m| <= KINK_ALIASES` of the kink spectrum are summed explicitly.
pub const KINK_ALIASES: i64 = 256;

pub fn kink_split<T: Real>(u0: &ComplexSignal<T>) -> KinkSplit {
    let u = u0.cast::<f64>();
    let Ok(o) = origin_stencil(u.grid()) else {
        return KinkSplit { c: Complex64::new(0.0, 0.0), smooth: u };
    };
    let (r, l) = one_sided_derivatives(&u, o);
    let fine = r - l;
    // the same stencil on every other node: a genuine kink gives nearly the
    // same jump, smooth data a jump eight times larger
    let v = u.values();
    let h4 = 4.0 * u.grid().step();
    let (o2, top) = (o.checked_sub(6), o + 6 < v.len());
    let coarse = match (o2, top) {
        (Some(_), true) => {
            let right = (-5.0 * v[o + 2] + 8.0 * v[o + 4] - 3.0 * v[o + 6]) / h4;
            let left = (5.0 * v[o - 2] - 8.0 * v[o - 4] + 3.0 * v[o - 6]) / h4;
            right - left
        }
        _ => fine,
    };
    if fine.norm() <= 1e-14 * u.sup_norm() || (coarse - fine).norm() > 0.5 * fine.norm() {
        return KinkSplit { c: Complex64::new(0.0, 0.0), smooth: u };
    }
    let c = -(fine * 4.0 - coarse) / 6.0;
    let smooth = u.map(|x, v| v - c * (-x.abs()).exp());
    KinkSplit { c, smooth }
}

/// DFT-normalized spectrum of `e^{it Delta} e^{-|x|}` sampled on `grid`, at frequency `xi`.
pub(crate) fn kink_spectrum(xi: f64, t: f64, grid: &UniformGrid<f64>) -> Complex64 {
    let cell = std::f64::consts::TAU / grid.step();
    let a = grid.start();
    (-KINK_ALIASES..=KINK_ALIASES)
        .map(|m| {
            let z = xi + m as f64 * cell;
            let w = z * z;
            Complex64::cis(-t * w + m as f64 * cell * a) * (2.0 / (1.0 + w))
        })
        .sum()
}

/// Centered spectrum of `e^{it Delta} u0` with the origin kink evolved exactly.
pub(crate) fn free_spectrum(split: &KinkSplit, t: f64) -> Result<SpectralSignal<f64>> {
    let mut spec = dft(&split.smooth)?;
    let grid = *split.smooth.grid();
    let freqs: Vec<f64> = (0..spec.values().len()).map(|k| spec.frequency(k)).collect();
    let kink: Vec<Complex64> = if split.c == Complex64::new(0.0, 0.0) {
        Vec::new()
    } else if t == 0.0 {
        let e = ComplexSignal::from_real_fn(grid, crate::signal::Axis::Space, |x| (-x.abs()).exp());
        dft(&e)?.values().to_vec()
    } else {
        freqs.par_iter().map(|&xi| kink_spectrum(xi, t, &grid)).collect()
    };
    for (k, v) in spec.values_mut().iter_mut().enumerate() {
        let xi = freqs[k];
        *v *= Complex64::cis(-t * xi * xi);
        if let Some(e) = kink.get(k) {
            *v += split.c * e;
        }
    }
    Ok(spec)
}

/// `e^{it Delta} u0` with the origin kink of `u0` evolved exactly; no window check.
pub fn evolve_kinked<T: Real>(u0: &ComplexSignal<T>, t: T) -> Result<ComplexSignal<T>> {
    let split = kink_split(u0);
    Ok(idft(&free_spectrum(&split, t.to_f64_lossy())?)?.cast())
}

/// `(1/pi) \int e^{-it xi^2} / (1 + xi^2) dxi`, the origin trace of `e^{it Delta} e^{-|x|}`.
///
/// Equals `e^{it} erfc(e^{i pi/4} sqrt t)` for `t >= 0`, and its conjugate at `|t|` for `t < 0`.
pub fn kink_trace(t: f64) -> Complex64 {
    if t < 0.0 {
        return kink_trace(-t).conj();
    }
    let e = fresnel_unit(t.sqrt()).conj();
    let erfc = 1.0 - 2.0 / std::f64::consts::PI.sqrt() * Complex64::cis(std::f64::consts::FRAC_PI_4) * e;
    Complex64::cis(t) * erfc
}

/// Low-band part `(1/pi) \int_{-1}^{1} e^{-it xi^2} / (1 + xi^2) dxi` of [`kink_trace`].
pub fn kink_trace_low(t: f64) -> Complex64 {
    let panels = t.abs().ceil() as usize + 1;
    let (xs, ws) = gauss_legendre(16);
    let width = 1.0 / panels as f64;
    let mut acc = Complex64::new(0.0, 0.0);
    for p in 0..panels {
        let c = (p as f64 + 0.5) * width;
        for (x, w) in xs.iter().zip(&ws) {
            let xi = c + 0.5 * width * x;
            acc += Complex64::cis(-t * xi * xi) * (w * 0.5 * width / (1.0 + xi * xi));
        }
    }
    acc * (2.0 / std::f64::consts::PI)
}

/// Fundamental solution `e^{i x^2/(4 tau)} / sqrt(4 pi i tau)`.
pub fn point_source_kernel<T: Real>(tau: T, x: T) -> Result<Complex<T>> {
    if tau == T::zero() {
        return Err(LabError::Singular);
    }
    Ok(cis(x * x / (T::lit(4.0) * tau)) * kernel_amplitude(tau))
}

/// Fraction of the spectral mass in the top quarter of the band.
pub fn spectral_tail_fraction<T: Real>(u0: &ComplexSignal<T>) -> Result<f64> {
    let spec = natural_spectrum(u0)?;
    let grid = *u0.grid();
    let cut = 0.75 * grid.nyquist().to_f64_lossy();
    let (mut tail, mut total) = (0.0, 0.0);
    for (v, xi) in spec.iter().zip(grid.natural_frequencies()) {
        let m = v.norm_sqr();
        total += m;
        if xi.to_f64_lossy().abs() > cut {
            tail += m;
        }
    }
    Ok(if total > 0.0 { tail / total } else { 0.0 })
}

/// Sobolev exponent suggested by the spectral decay between the two top octaves
/// (`|u(xi)|^2 ~ xi^{-1-2s}`); `+inf` when the top octave is at round-off level.
pub fn estimate_sobolev_exponent<T: Real>(u0: &ComplexSignal<T>) -> Result<f64> {
    let spec = natural_spectrum(u0)?;
    let grid = *u0.grid();
    let nyq = grid.nyquist().to_f64_lossy();
    let (mut lo, mut hi, mut total) = (0.0, 0.0, 0.0);
    for (v, xi) in spec.iter().zip(grid.natural_frequencies()) {
        let a = xi.to_f64_lossy().abs();
        let m = v.norm_sqr();
        total += m;
        if a > nyq / 4.0 && a <= nyq / 2.0 {
            lo += m;
        } else if a > nyq / 2.0 {
            hi += m;
        }
    }
    if hi <= 1e-24 * total || lo == 0.0 {
        return Ok(f64::INFINITY);
    }
    // band energies scale as 2^{-2s} per octave
    Ok(0.5 * (lo / hi).log2())
}

fn natural_spectrum<T: Real>(u0: &ComplexSignal<T>) -> Result<Vec<Complex64>> {
    let grid = *u0.grid();
    if !grid.is_power_of_two() {
        return Err(LabError::NotPowerOfTwo(grid.count()));
    }
    let mut buf: Vec<Complex64> = u0.values().iter().map(|v| to_c64(*v)).collect();
    fft_forward(&mut buf);
    Ok(buf)
}

pub(crate) fn to_c64<T: Real>(z: Complex<T>) -> Complex64 {
    Complex64::new(z.re.to_f64_lossy(), z.im.to_f64_lossy())
}

pub(crate) fn from_c64<T: Real>(z: Complex64) -> Complex<T> {
    Complex::new(T::lit(z.re), T::lit(z.im))
}

/// Options of the origin-trace quadrature.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceOptions {
    /// Largest tolerated spectral mass fraction in the top quarter of the band.
    pub tail_limit: f64,
    /// Target phase advance of `u0`'s transform across one panel.
    pub panel_phase: f64,
    /// Relative L1 spectral mass below which the high band is cut.
    pub band_cut: f64,
}

impl Default for TraceOptions {
    fn default() -> Self {
        Self { tail_limit: 1e-6, panel_phase: 0.01, band_cut: 1e-13 }
    }
}

/// `(e^{it Delta} u0)(0) = I(t) + II(t)` on a time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct OriginTrace<T: Real> {
    pub time_grid: UniformGrid<T>,
    pub values: Vec<Complex<T>>,
    pub split_i: Vec<Complex<T>>,
    pub split_ii: Vec<Complex<T>>,
}

impl<T: Real> OriginTrace<T> {
    pub fn as_signal(&self) -> ComplexSignal<T> {
        ComplexSignal::new(self.time_grid, self.values.clone(), crate::signal::Axis::Time)
            .expect("trace length matches its grid")
    }
}

/// Direct evaluation of `hat u0(xi) = h sum_j u_j e^{-i xi x_j}` at arbitrary `xi`.
#[derive(Debug, Clone)]
pub struct SpectrumProbe {
    start: f64,
    step: f64,
    values: Vec<Complex64>,
}

impl SpectrumProbe {
    pub fn new<T: Real>(u0: &ComplexSignal<T>) -> Self {
        let g = u0.grid();
        Self {
            start: g.start().to_f64_lossy(),
            step: g.step().to_f64_lossy(),
            values: u0.values().iter().map(|v| to_c64(*v)).collect(),
        }
    }

    pub fn eval(&self, xi: f64) -> Complex64 {
        let w = Complex64::cis(-xi * self.step);
        let mut acc = Complex64::new(0.0, 0.0);
        for v in self.values.iter().rev() {
            acc = acc * w + v;
        }
        acc * Complex64::cis(-xi * self.start) * self.step
    }

    /// Third-moment radius `(sum |x|^3 |u| / sum |u|)^{1/3}`.
    pub fn effective_radius(&self) -> f64 {
        let (mut m3, mut m0) = (0.0, 0.0);
        for (j, v) in self.values.iter().enumerate() {
            let x = (self.start + j as f64 * self.step).abs();
            let a = v.norm();
            m3 += x * x * x * a;
            m0 += a;
        }
        if m0 == 0.0 {
            1.0
        } else {
            (m3 / m0).cbrt().max(1.0)
        }
    }
}

/// Precomputed quadrature for the origin trace of one initial datum.
#[derive(Debug, Clone)]
pub struct TracePlan {
    /// `(weight * hat u0(xi) / 2 pi, xi^2)` at Gauss nodes of `[-1, 1]`.
    low: Vec<(Complex64, f64)>,
    /// Quadratic panels in `tau = xi^2`: centre, half-width, coefficients.
    high: Vec<HighPanel>,
    band_top: f64,
}

#[derive(Debug, Clone, Copy)]
struct HighPanel {
    centre: f64,
    half: f64,
    c: [Complex64; 3],
}

impl TracePlan {
    pub fn new<T: Real>(u0: &ComplexSignal<T>, opts: TraceOptions) -> Result<Self> {
        let grid = *u0.grid();
        let tail = spectral_tail_fraction(u0)?;
        if tail > opts.tail_limit {
            return Err(LabError::SpectralTruncation { fraction: tail, limit: opts.tail_limit });
        }
        let s = estimate_sobolev_exponent(u0)?;
        if s <= 0.5 {
            log::warn!("initial datum looks no smoother than H^{s:.2}; the origin trace may be ill-defined");
        }
        let probe = SpectrumProbe::new(u0);
        let n = grid.count();
        let h = grid.step().to_f64_lossy();
        let a = grid.start().to_f64_lossy();
        let nyq = grid.nyquist().to_f64_lossy();
        let radius = probe.effective_radius();

        // low band by panel Gauss rules
        let panels = radius.ceil() as usize + 4;
        let (xs, ws) = gauss_legendre(16);
        let mut low = Vec::with_capacity(panels * 16);
        let width = 2.0 / panels as f64;
        for p in 0..panels {
            let c = -1.0 + (p as f64 + 0.5) * width;
            for (x, w) in xs.iter().zip(&ws) {
                let xi = c + 0.5 * width * x;
                let v = probe.eval(xi) * (w * 0.5 * width / std::f64::consts::TAU);
                low.push((v, xi * xi));
            }
        }

        // high band cut-off from the L1 spectral tail
        let spec = natural_spectrum(u0)?;
        let freqs = grid.natural_frequencies();
        let mut by_freq: Vec<(f64, f64)> =
            spec.iter().zip(&freqs).map(|(v, xi)| (xi.to_f64_lossy().abs(), v.norm())).collect();
        by_freq.sort_by(|p, q| p.0.total_cmp(&q.0));
        let total: f64 = by_freq.iter().map(|p| p.1).sum();
        let mut acc = 0.0;
        let mut top = nyq;
        for &(xi, m) in by_freq.iter().rev() {
            acc += m;
            if acc > opts.band_cut * total {
                top = (xi + 1.0).min(nyq);
                break;
            }
        }

        let mut high = Vec::new();
        if top > 1.0 {
            let target = (opts.panel_phase / radius).min(0.005);
            let base = std::f64::consts::TAU / (n as f64 * h);
            let pad = ((base / target).ceil() as usize).next_power_of_two().max(1);
            let m = pad * n;
            let delta = std::f64::consts::TAU / (m as f64 * h);
            let mut k_max = ((top - 1.0) / delta).floor() as usize;
            k_max -= k_max % 2;
            if k_max >= 2 {
                for sign in [1.0f64, -1.0] {
                    let mut buf = vec![Complex64::new(0.0, 0.0); m];
                    for (j, v) in probe.values.iter().enumerate() {
                        let x = a + j as f64 * h;
                        buf[j] = v * Complex64::cis(-sign * x);
                    }
                    fft_forward(&mut buf);
                    let uhat = |k: usize| -> Complex64 {
                        if sign > 0.0 {
                            buf[k] * Complex64::cis(-(k as f64) * delta * a) * h
                        } else {
                            buf[(m - k) % m] * Complex64::cis(k as f64 * delta * a) * h
                        }
                    };
                    let vals: Vec<Complex64> = (0..=k_max).map(uhat).collect();
                    let f = |k: usize| {
                        let xi = 1.0 + k as f64 * delta;
                        vals[k] / (2.0 * std::f64::consts::TAU * xi)
                    };
                    for k in (0..k_max).step_by(2) {
                        let xm = 1.0 + (k + 1) as f64 * delta;
                        let xa = xm - delta;
                        let xb = xm + delta;
                        let centre = 0.5 * (xa * xa + xb * xb);
                        let half = 2.0 * delta * xm;
                        let (s1, s2, s3) = (-half, -delta * delta, half);
                        let (fa, fm, fb) = (f(k), f(k + 1), f(k + 2));
                        let d1 = (fm - fa) / (s2 - s1);
                        let d2 = ((fb - fm) / (s3 - s2) - d1) / (s3 - s1);
                        let c = [fa - d1 * s1 + d2 * s1 * s2, d1 - d2 * (s1 + s2), d2];
                        high.push(HighPanel { centre, half, c });
                    }
                }
            }
        }
        // merge the two signs: panels share geometry, so add coefficients
        let half_len = high.len() / 2;
        if half_len > 0 {
            let (pos, neg) = high.split_at(half_len);
            high = pos
                .iter()
                .zip(neg)
                .map(|(p, q)| HighPanel {
                    centre: p.centre,
                    half: p.half,
                    c: [p.c[0] + q.c[0], p.c[1] + q.c[1], p.c[2] + q.c[2]],
                })
                .collect();
        }
        let band_top = high.last().map(|p| (p.centre + p.half).sqrt()).unwrap_or(1.0);
        Ok(Self { low, high, band_top })
    }

    /// Upper end of the integrated band.
    pub fn band_top(&self) -> f64 {
        self.band_top
    }

    pub fn eval(&self, t: f64) -> (Complex64, Complex64) {
        let low = self.low.iter().map(|(v, x2)| v * Complex64::cis(-t * x2)).sum();
        let high = self
            .high
            .iter()
            .map(|p| {
                let m = filon_quadratic_moments(t, p.half);
                Complex64::cis(-t * p.centre) * (p.c[0] * m[0] + p.c[1] * m[1] + p.c[2] * m[2])
            })
            .sum();
        (low, high)
    }
}

/// Origin trace with default options.
pub fn origin_trace<T: Real>(u0: &ComplexSignal<T>, time_grid: &UniformGrid<T>) -> Result<OriginTrace<T>> {
    origin_trace_with(u0, time_grid, TraceOptions::default())
}

pub fn origin_trace_with<T: Real>(
    u0: &ComplexSignal<T>,
    time_grid: &UniformGrid<T>,
    opts: TraceOptions,
) -> Result<OriginTrace<T>> {
    let split = kink_split(u0);
    let plan = TracePlan::new(&split.smooth, opts)?;
    let c = split.c;
    let parts: Vec<(Complex64, Complex64)> = (0..time_grid.count())
        .into_par_iter()
        .map(|k| {
            let t = time_grid.point(k).to_f64_lossy();
            let (lo, hi) = plan.eval(t);
            if c == Complex64::new(0.0, 0.0) {
                return (lo, hi);
            }
            let kl = kink_trace_low(t);
            (lo + c * kl, hi + c * (kink_trace(t) - kl))
        })
        .collect();
    let split_i: Vec<Complex<T>> = parts.iter().map(|p| from_c64(p.0)).collect();
    let split_ii: Vec<Complex<T>> = parts.iter().map(|p| from_c64(p.1)).collect();
    let values = parts.iter().map(|p| from_c64(p.0 + p.1)).collect();
    Ok(OriginTrace { time_grid: *time_grid, values, split_i, split_ii })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::Axis;
    use std::f64::consts::PI;

    fn gaussian(grid: UniformGrid<f64>) -> ComplexSignal<f64> {
        ComplexSignal::from_real_fn(grid, Axis::Space, |x| (-x * x / 2.0).exp() / PI.powf(0.25))
    }

    /// `e^{it Delta}` of `pi^{-1/4} e^{-x^2/2}`.
    fn gaussian_evolved(t: f64, x: f64) -> Complex64 {
        let d = Complex64::new(1.0, 2.0 * t);
        (-x * x / (2.0 * d)).exp() / (d.sqrt() * PI.powf(0.25))
    }

    #[test]
    fn evolve_matches_closed_form_gaussian() {
        let grid = UniformGrid::<f64>::centered(80.0, 4096).unwrap();
        let u0 = gaussian(grid);
        for t in [0.0, 0.5, 1.0] {
            let u = evolve(&u0, t).unwrap();
            let exact = ComplexSignal::from_fn(grid, Axis::Space, |x| gaussian_evolved(t, x));
            assert!(u.sub(&exact).unwrap().l2_norm() < 1e-10, "t = {t}");
        }
    }

    #[test]
    fn evolve_is_unitary_and_a_group() {
        let grid = UniformGrid::<f64>::centered(80.0, 2048).unwrap();
        let u0 = ComplexSignal::from_fn(grid, Axis::Space, |x| {
            Complex64::new((-x * x).exp() * (1.0 + x), (-(x - 1.0) * (x - 1.0)).exp())
        });
        let n0 = u0.l2_norm();
        for t in [0.1, 1.0] {
            let u = evolve(&u0, t).unwrap();
            assert!((u.l2_norm() - n0).abs() < 1e-10 * n0);
        }
        let a = evolve(&evolve(&u0, 0.3).unwrap(), 0.4).unwrap();
        let b = evolve(&u0, 0.7).unwrap();
        assert!(a.sub(&b).unwrap().l2_norm() < 1e-9 * n0);
    }

    #[test]
    fn evolve_reports_leakage() {
        let grid = UniformGrid::<f64>::centered(10.0, 256).unwrap();
        let u0 = gaussian(grid);
        assert!(matches!(evolve(&u0, 5.0), Err(LabError::WindowLeakage { .. })));
    }

    #[test]
    fn kernel_normalization_and_branch() {
        let k = point_source_kernel(1.0 / (4.0 * PI), 0.0).unwrap();
        assert!((k.norm() - 1.0).abs() < 1e-14);
        assert!((k.arg() + PI / 4.0).abs() < 1e-14);
        for x in [0.0, 0.7, -3.0] {
            let k = point_source_kernel(0.3, x).unwrap();
            assert!((k.norm() - 1.0 / (4.0 * PI * 0.3f64).sqrt()).abs() < 1e-14);
        }
        assert_eq!(point_source_kernel(0.0, 1.0), Err(LabError::Singular));
    }

    #[test]
    fn trace_at_zero_is_the_datum() {
        let grid = UniformGrid::<f64>::centered(40.0, 2048).unwrap();
        let times = UniformGrid::spanning(0.0, 0.5, 3).unwrap();
        let tr = origin_trace(&gaussian(grid), &times).unwrap();
        assert!((tr.values[0] - Complex64::new(PI.powf(-0.25), 0.0)).norm() < 1e-10, "{} {:?}", tr.values[0], tr);
        assert!((tr.values[2] - gaussian_evolved(0.5, 0.0)).norm() < 1e-6);
        for k in 0..3 {
            assert!((tr.values[k] - tr.split_i[k] - tr.split_ii[k]).norm() < 1e-15);
        }
    }

    #[test]
    fn trace_of_bound_state_at_zero() {
        let grid = UniformGrid::<f64>::centered(80.0, 4096).unwrap();
        let u0 = ComplexSignal::from_real_fn(grid, Axis::Space, |x: f64| (-x.abs()).exp());
        let times = UniformGrid::spanning(0.0, 1.0, 2).unwrap();
        let tr = origin_trace(&u0, &times).unwrap();
        assert!((tr.values[0] - Complex64::new(1.0, 0.0)).norm() < 1e-6, "{}", tr.values[0]);
    }

    #[test]
    fn trace_agrees_with_evolve_at_origin() {
        let grid = UniformGrid::<f64>::centered(80.0, 4096).unwrap();
        let u0 = ComplexSignal::from_fn(grid, Axis::Space, |x| {
            Complex64::cis(-2.5 * x) * ((-(x - 5.0) * (x - 5.0) / 2.0).exp() / PI.powf(0.25))
        });
        let times = UniformGrid::spanning(0.0, 1.0, 9).unwrap();
        let tr = origin_trace(&u0, &times).unwrap();
        let origin = grid.node_of(0.0).unwrap();
        for (k, t) in times.points().enumerate() {
            let direct = evolve_unchecked(&u0, t).unwrap().values()[origin];
            assert!((tr.values[k] - direct).norm() < 1e-6, "t = {t}: {} vs {}", tr.values[k], direct);
        }
    }

    #[test]
    fn rough_data_trips_the_tail_test() {
        let grid = UniformGrid::<f64>::centered(20.0, 512).unwrap();
        let u0 = ComplexSignal::from_real_fn(grid, Axis::Space, |x: f64| if x.abs() < 1.0 { 1.0 } else { 0.0 });
        let times = UniformGrid::spanning(0.0, 1.0, 2).unwrap();
        assert!(matches!(origin_trace(&u0, &times), Err(LabError::SpectralTruncation { .. })));
    }
}
