//! Reconstruction of `u(t, .)` from a solved charge and per-snapshot diagnostics.
//!
//! Both routes treat the charge as the piecewise-linear interpolant of its
//! samples and return point values on the periodic space grid of `u0`.
//! The Fourier route folds the slowly decaying source spectrum onto the
//! band; the Duhamel route integrates the point-source kernel exactly per
//! panel and adds periodic images.

use num_complex::{Complex, Complex64};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::charge::ChargeSolution;
use crate::coupling::CouplingPath;
use crate::error::{LabError, Result};
use crate::propagator::{
    free_spectrum, from_c64, kink_split, one_sided_derivatives, origin_stencil, to_c64, LeakageGuard,
};
use crate::quadrature::{filon_linear, kernel_antiderivative, kernel_constants, kernel_moments};
use crate::scalar::Real;
use crate::signal::{dft, idft, sobolev_norm, Axis, ComplexSignal, NormOptions, UniformGrid};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Route {
    Fourier,
    Duhamel,
    /// Finite-difference reference solver.
    Reference,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SnapshotDiagnostics<T> {
    pub time: T,
    pub mass: T,
    pub h1: T,
    /// Filled by [`jump_residual`]; needs the coupling.
    pub jump_residual: Option<T>,
    pub trace_at_0: Complex<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WaveField<T: Real> {
    pub times: UniformGrid<T>,
    pub space: UniformGrid<T>,
    pub snapshots: Vec<ComplexSignal<T>>,
    pub route: Route,
    pub diagnostics: Vec<SnapshotDiagnostics<T>>,
}

/// Discretization controls shared by both routes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReconstructionOptions {
    /// Aliases `|m| <= alias_terms` of the source spectrum evaluated by quadrature.
    pub alias_terms: usize,
    /// Further aliases summed from the large-frequency expansion; the rest in closed form.
    pub tail_terms: usize,
    /// Periodic images `|m| <= images` of the point source (Duhamel route).
    pub images: usize,
    /// Further images `images < |m| <= far_images` from their large-distance expansion.
    pub far_images: usize,
    pub guard: LeakageGuard,
}

impl Default for ReconstructionOptions {
    fn default() -> Self {
        Self { alias_terms: 2, tail_terms: 256, images: 1, far_images: 2048, guard: LeakageGuard::default() }
    }
}

/// Summary of a field's conserved and controlled quantities.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldDiagnostics<T> {
    pub snapshots: Vec<SnapshotDiagnostics<T>>,
    /// `max_k |mass_k - mass_0| / mass_0`.
    pub mass_drift: T,
    pub h1_max: T,
    /// `max_k ||u_{k+1} - u_k||_{H^1}` over consecutive snapshots.
    pub modulus_of_continuity: T,
}

impl<T: Real> WaveField<T> {
    pub fn len(&self) -> usize {
        self.snapshots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.snapshots.is_empty()
    }

    /// `x, re u, im u, |u|^2` rows of snapshot `k`.
    pub fn write_snapshot_csv<W: std::io::Write>(&self, k: usize, mut w: W) -> std::io::Result<()> {
        writeln!(w, "x,re,im,abs2")?;
        for (j, v) in self.snapshots[k].values().iter().enumerate() {
            writeln!(w, "{},{},{},{}", self.space.point(j), v.re, v.im, v.norm_sqr())?;
        }
        Ok(())
    }

    pub fn diagnostics_json(&self) -> serde_json::Value {
        let rows: Vec<_> = self
            .diagnostics
            .iter()
            .map(|d| {
                serde_json::json!({
                    "t": d.time.to_f64_lossy(),
                    "mass": d.mass.to_f64_lossy(),
                    "h1": d.h1.to_f64_lossy(),
                    "jump_residual": d.jump_residual.map(|j| j.to_f64_lossy()),
                    "trace_at_0": [d.trace_at_0.re.to_f64_lossy(), d.trace_at_0.im.to_f64_lossy()],
                })
            })
            .collect();
        serde_json::json!({ "route": self.route, "series": rows })
    }

    /// `(sum_k ||u_k - v_k||^2 / sum_k ||v_k||^2)^{1/2}` over all snapshots.
    pub fn relative_distance(&self, reference: &Self) -> Result<T> {
        if self.len() != reference.len() {
            return Err(LabError::GridMismatch("fields have different snapshot counts".into()));
        }
        let (mut num, mut den) = (T::zero(), T::zero());
        for (a, b) in self.snapshots.iter().zip(&reference.snapshots) {
            let d = a.sub(b)?.l2_norm();
            let r = b.l2_norm();
            num += d * d;
            den += r * r;
        }
        Ok(if den > T::zero() { (num / den).sqrt() } else { num.sqrt() })
    }

    pub fn mass_drift(&self) -> T {
        let m0 = self.diagnostics.first().map(|d| d.mass).unwrap_or(T::zero());
        if m0 <= T::zero() {
            return T::zero();
        }
        self.diagnostics.iter().fold(T::zero(), |acc, d| acc.max((d.mass - m0).abs() / m0))
    }
}

pub(crate) fn mass<T: Real>(u: &ComplexSignal<T>) -> T {
    u.values().iter().fold(T::zero(), |a, v| a + v.norm_sqr()) * u.grid().step()
}

fn value_at_origin<T: Real>(u: &ComplexSignal<T>) -> Complex<T> {
    match u.grid().node_of(T::zero()) {
        Some(k) => u.values()[k],
        None => u.interpolate(T::zero()),
    }
}

pub(crate) fn snapshot_diagnostics<T: Real>(t: T, u: &ComplexSignal<T>) -> Result<SnapshotDiagnostics<T>> {
    Ok(SnapshotDiagnostics {
        time: t,
        mass: mass(u),
        h1: sobolev_norm(u, T::one(), NormOptions::lenient())?,
        jump_residual: None,
        trace_at_0: value_at_origin(u),
    })
}

/// Charge samples split into the forward and backward branch.
#[derive(Debug, Clone)]
pub(crate) struct ChargeSampler {
    h: f64,
    fwd: Vec<Complex64>,
    bwd: Vec<Complex64>,
}

impl ChargeSampler {
    pub(crate) fn new<T: Real>(grid: &UniformGrid<T>, values: &[Complex<T>]) -> Result<Self> {
        let origin = grid
            .node_of(T::zero())
            .ok_or_else(|| LabError::InvalidGrid("charge grid must contain t = 0 as a node".into()))?;
        let v: Vec<Complex64> = values.iter().map(|z| to_c64(*z)).collect();
        Ok(Self {
            h: grid.step().to_f64_lossy(),
            fwd: v[origin..].to_vec(),
            bwd: v[..=origin].iter().rev().copied().collect(),
        })
    }

    /// Branch-wise second-order derivative `dq/ds`.
    fn derivative(&self) -> Self {
        let d = |q: &[Complex64], sign: f64| -> Vec<Complex64> {
            let n = q.len();
            if n < 3 {
                return vec![Complex64::new(0.0, 0.0); n];
            }
            let h2 = 2.0 * self.h;
            (0..n)
                .map(|k| {
                    let v = if k == 0 {
                        (-3.0 * q[0] + 4.0 * q[1] - q[2]) / h2
                    } else if k == n - 1 {
                        (3.0 * q[n - 1] - 4.0 * q[n - 2] + q[n - 3]) / h2
                    } else {
                        (q[k + 1] - q[k - 1]) / h2
                    };
                    v * sign
                })
                .collect()
        };
        Self { h: self.h, fwd: d(&self.fwd, 1.0), bwd: d(&self.bwd, -1.0) }
    }

    fn branch(&self, t: f64) -> (&[Complex64], f64) {
        if t >= 0.0 {
            (&self.fwd, t)
        } else {
            (&self.bwd, -t)
        }
    }

    fn check_time(&self, t: f64) -> Result<()> {
        let (q, r) = self.branch(t);
        let reach = (q.len() - 1) as f64 * self.h;
        if r > reach * (1.0 + 1e-12) + 1e-14 {
            return Err(LabError::Domain(format!("snapshot time {t} lies outside the charge grid")));
        }
        Ok(())
    }

    /// Node count `n` and remainder of `|t| = n h + frac`.
    fn split(&self, q: &[Complex64], r: f64) -> (usize, f64) {
        let x = r / self.h;
        let mut n = x.floor() as usize;
        let mut frac = r - n as f64 * self.h;
        if frac > self.h * (1.0 - 1e-12) {
            n += 1;
            frac = 0.0;
        }
        if n >= q.len() - 1 {
            return (q.len() - 1, 0.0);
        }
        if frac < 1e-12 * self.h {
            frac = 0.0;
        }
        (n, frac)
    }

    pub(crate) fn value(&self, t: f64) -> Complex64 {
        let (q, r) = self.branch(t);
        let (n, frac) = self.split(q, r);
        if frac == 0.0 {
            q[n]
        } else {
            q[n] + (q[n + 1] - q[n]) * (frac / self.h)
        }
    }

    /// `\int_0^t e^{i omega s} q(s) ds` for the piecewise-linear `q`.
    pub(crate) fn fourier_integral(&self, omega: f64, t: f64) -> Complex64 {
        if t == 0.0 {
            return Complex64::new(0.0, 0.0);
        }
        let (q, r) = self.branch(t);
        let (w, sign) = if t > 0.0 { (omega, 1.0) } else { (-omega, -1.0) };
        let (n, frac) = self.split(q, r);
        let h = self.h;
        let phi = w * h;
        let (g0, g1) = filon_linear(phi);
        let rot = Complex64::cis(phi);
        let (mut p, mut rr) = (Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0));
        let mut e = Complex64::new(1.0, 0.0);
        for j in 0..n {
            if j % 128 == 0 {
                e = Complex64::cis(w * j as f64 * h);
            }
            p += e * q[j];
            rr += e * q[j + 1];
            e *= rot;
        }
        let mut acc = h * ((g0 - g1) * p + g1 * rr);
        if frac > 0.0 {
            let en = Complex64::cis(w * n as f64 * h);
            let qt = q[n] + (q[n + 1] - q[n]) * (frac / h);
            let (a0, a1) = filon_linear(w * frac);
            acc += frac * en * ((a0 - a1) * q[n] + a1 * qt);
        }
        acc * sign
    }
}

/// `sum_{|m| > m_max} 1/(xi + m Omega)^2`.
fn alias_remainder(xi: f64, omega: f64, m_max: usize) -> f64 {
    let pi = std::f64::consts::PI;
    if xi.abs() < 1e-12 * omega {
        let partial: f64 = (1..=m_max).map(|m| 2.0 / (m as f64 * omega).powi(2)).sum();
        return pi * pi / (3.0 * omega * omega) - partial;
    }
    let full = (pi / (omega * (pi * xi / omega).sin())).powi(2);
    let partial: f64 = (-(m_max as i64)..=m_max as i64).map(|m| 1.0 / (xi + m as f64 * omega).powi(2)).sum();
    (full - partial).max(0.0)
}

/// Folded spectrum of `-i e^{-it xi^2} F[f 1_[0,t]](-xi^2)` at the centered frequencies.
///
/// `far` is the non-oscillatory large-frequency coefficient: the field of
/// `f` behaves like `(far_t - e^{-it omega} far_0) / omega` there.
fn folded_source(
    freqs: &[f64],
    cell: f64,
    sampler: &ChargeSampler,
    t: f64,
    far: (Complex64, Complex64),
    coef: Complex64,
    opts: &ReconstructionOptions,
) -> Vec<Complex64> {
    let m_near = opts.alias_terms as i64;
    let m_tail = opts.tail_terms.max(opts.alias_terms) as i64;
    freqs
        .par_iter()
        .map(|&xi| {
            let mut acc = Complex64::new(0.0, 0.0);
            for m in -m_near..=m_near {
                let z = xi + m as f64 * cell;
                let w = z * z;
                acc += coef * Complex64::cis(-t * w) * sampler.fourier_integral(w, t);
            }
            for m in (m_near + 1)..=m_tail {
                for z in [xi + m as f64 * cell, xi - m as f64 * cell] {
                    let w = z * z;
                    acc += coef * (far.0 - Complex64::cis(-t * w) * far.1) / Complex64::new(0.0, w);
                }
            }
            acc + coef * far.0 / Complex64::new(0.0, 1.0) * alias_remainder(xi, cell, m_tail as usize)
        })
        .collect()
}

fn check_times<T: Real>(sampler: &ChargeSampler, times: &UniformGrid<T>) -> Result<()> {
    times.points().try_for_each(|t| sampler.check_time(t.to_f64_lossy()))
}

pub fn reconstruct_fourier<T: Real>(
    u0: &ComplexSignal<T>,
    q: &ChargeSolution<T>,
    times: &UniformGrid<T>,
) -> Result<WaveField<T>> {
    reconstruct_fourier_with(u0, q, times, ReconstructionOptions::default())
}

/// `hat u(t) = e^{-it xi^2} hat u0 - i e^{-it xi^2} F[q 1_[0,t]](-xi^2)`.
pub fn reconstruct_fourier_with<T: Real>(
    u0: &ComplexSignal<T>,
    q: &ChargeSolution<T>,
    times: &UniformGrid<T>,
    opts: ReconstructionOptions,
) -> Result<WaveField<T>> {
    let sampler = ChargeSampler::new(q.q.grid(), q.q.values())?;
    check_times(&sampler, times)?;
    let split = kink_split(u0);
    let spec0 = dft(&split.smooth)?;
    let n = spec0.values().len();
    let freqs: Vec<f64> = (0..n).map(|k| spec0.frequency(k)).collect();
    let cell = n as f64 * spec0.frequency_grid().step();
    let mut snapshots = Vec::with_capacity(times.count());
    let mut diagnostics = Vec::with_capacity(times.count());
    for t in times.points() {
        let tf = t.to_f64_lossy();
        let mut spec = free_spectrum(&split, tf)?;
        if tf != 0.0 {
            let far = (sampler.value(tf), sampler.value(0.0));
            let ii = Complex64::new(0.0, 1.0);
            // S ~ -(q(t) - e^{-it w} q(0)) / w, i.e. coef * far / (i w) with coef = -i
            let src = folded_source(&freqs, cell, &sampler, tf, far, -ii, &opts);
            for (v, s) in spec.values_mut().iter_mut().zip(src) {
                *v += s;
            }
        }
        let u = idft(&spec)?;
        opts.guard.check(&u)?;
        let u: ComplexSignal<T> = u.cast();
        diagnostics.push(snapshot_diagnostics(t, &u)?);
        snapshots.push(u);
    }
    Ok(WaveField { times: *times, space: *u0.grid(), snapshots, route: Route::Fourier, diagnostics })
}

pub fn reconstruct_duhamel<T: Real>(
    u0: &ComplexSignal<T>,
    q: &ChargeSolution<T>,
    times: &UniformGrid<T>,
) -> Result<WaveField<T>> {
    reconstruct_duhamel_with(u0, q, times, ReconstructionOptions::default())
}

/// `u(t) = e^{it Delta} u0 - i \int_0^t K(t - s, .) q(s) ds` with exact kernel moments per panel.
pub fn reconstruct_duhamel_with<T: Real>(
    u0: &ComplexSignal<T>,
    q: &ChargeSolution<T>,
    times: &UniformGrid<T>,
    opts: ReconstructionOptions,
) -> Result<WaveField<T>> {
    let sampler = ChargeSampler::new(q.q.grid(), q.q.values())?;
    check_times(&sampler, times)?;
    let split = kink_split(u0);
    let space = *split.smooth.grid();
    let period = space.step() * space.count() as f64;
    let xs: Vec<f64> = space.points().collect();
    let mut snapshots = Vec::with_capacity(times.count());
    let mut diagnostics = Vec::with_capacity(times.count());
    for t in times.points() {
        let tf = t.to_f64_lossy();
        let mut u = idft(&free_spectrum(&split, tf)?)?;
        if tf != 0.0 {
            let src = duhamel_source(&xs, period, &sampler, tf, opts.images, opts.far_images);
            for (v, s) in u.values_mut().iter_mut().zip(src) {
                *v += s;
            }
        }
        opts.guard.check(&u)?;
        let u: ComplexSignal<T> = u.cast();
        diagnostics.push(snapshot_diagnostics(t, &u)?);
        snapshots.push(u);
    }
    Ok(WaveField { times: *times, space: *u0.grid(), snapshots, route: Route::Duhamel, diagnostics })
}

fn duhamel_source(
    xs: &[f64],
    period: f64,
    sampler: &ChargeSampler,
    t: f64,
    images: usize,
    far_images: usize,
) -> Vec<Complex64> {
    let (q, r) = sampler.branch(t);
    let (n, frac) = sampler.split(q, r);
    let h = sampler.h;
    // lag nodes tau = |t| - |s| in decreasing order with the charge there
    let mut nodes: Vec<(f64, Complex64)> = (0..=n).map(|j| (r - j as f64 * h, q[j])).collect();
    if frac > 0.0 {
        nodes.push((0.0, q[n] + (q[n + 1] - q[n]) * (frac / h)));
    } else if let Some(last) = nodes.last_mut() {
        last.0 = 0.0;
    }
    let forward = t > 0.0;
    let amp = 1.0 / (4.0 * std::f64::consts::PI).sqrt();
    // -i e^{-i pi/4} forward; the backward branch reverses the orientation of the integral
    let pref = if forward {
        Complex64::new(0.0, -1.0) * Complex64::cis(-std::f64::consts::FRAC_PI_4) * amp
    } else {
        Complex64::new(0.0, 1.0) * Complex64::cis(std::f64::consts::FRAC_PI_4) * amp
    };
    let im = images as i64;
    xs.par_iter()
        .map(|&x| {
            let mut acc = Complex64::new(0.0, 0.0);
            for m in -im..=im {
                let y = x + m as f64 * period;
                let beta = 0.25 * y * y;
                let constants = kernel_constants(beta);
                let mut prev = kernel_antiderivative(beta, nodes[0].0);
                for k in 0..nodes.len() - 1 {
                    let (hi_tau, q_hi) = nodes[k];
                    let (lo_tau, q_lo) = nodes[k + 1];
                    let cur = kernel_antiderivative(beta, lo_tau);
                    let (mut m0, mut m1) = kernel_moments(&cur, &prev, constants);
                    if !forward {
                        m0 = m0.conj();
                        m1 = m1.conj();
                    }
                    let dt = hi_tau - lo_tau;
                    if dt > 0.0 {
                        acc += q_lo * m0 + (q_hi - q_lo) / dt * (m1 - lo_tau * m0);
                    }
                    prev = cur;
                }
            }
            // far images: the s = 0 endpoint term i r^{3/2} q(0) e^{i beta / r} / beta
            let q_start = nodes[0].1;
            if images > 0 && q_start != Complex64::new(0.0, 0.0) {
                let mut far = Complex64::new(0.0, 0.0);
                for m in (im + 1)..=(far_images as i64) {
                    for y in [x + m as f64 * period, x - m as f64 * period] {
                        let beta = 0.25 * y * y;
                        far += Complex64::cis(beta / r) / beta;
                    }
                }
                let term = Complex64::new(0.0, r.powf(1.5)) * far;
                acc += q_start * if forward { term } else { term.conj() };
            }
            pref * acc
        })
        .collect()
}

pub use crate::propagator::ORIGIN_NODES;

/// `|u'(0+) - u'(0-) - alpha_T(t) u(t, 0)| / ||u||_{H^1}` per snapshot.
pub fn jump_residual<T: Real>(field: &WaveField<T>, alpha: &CouplingPath<T>) -> Result<Vec<T>> {
    let o = origin_stencil(&field.space)?;
    field
        .snapshots
        .iter()
        .zip(&field.diagnostics)
        .map(|(u, d)| {
            let (r, l) = one_sided_derivatives(u, o);
            let defect = (r - l - u.values()[o] * alpha.truncated(d.time)).norm();
            Ok(if d.h1 > T::zero() { defect / d.h1 } else { defect })
        })
        .collect()
}

/// Stores [`jump_residual`] in the diagnostics of `field`.
pub fn attach_jump_residuals<T: Real>(field: &mut WaveField<T>, alpha: &CouplingPath<T>) -> Result<()> {
    let res = jump_residual(field, alpha)?;
    for (d, r) in field.diagnostics.iter_mut().zip(res) {
        d.jump_residual = Some(r);
    }
    Ok(())
}

/// Relative tolerance of the initial jump condition `u0'(0+) - u0'(0-) = q(0)`.
pub const DOMAIN_TOLERANCE: f64 = 1e-3;

pub fn time_derivative<T: Real>(u0: &ComplexSignal<T>, q: &ChargeSolution<T>, t: T) -> Result<ComplexSignal<T>> {
    time_derivative_with(u0, q, t, ReconstructionOptions::default())
}

/// `i d/dt u(t)`: `e^{-it xi^2} [xi^2 hat u0 + q(0)] + e^{-it xi^2} F[q' 1_[0,t]](-xi^2)`.
///
/// The kink of `u0` at the origin is carried analytically as `c e^{-|x|}` with
/// `c = -q(0)/2`, so the bracket decays for data in the operator domain.
pub fn time_derivative_with<T: Real>(
    u0: &ComplexSignal<T>,
    q: &ChargeSolution<T>,
    t: T,
    opts: ReconstructionOptions,
) -> Result<ComplexSignal<T>> {
    let sampler = ChargeSampler::new(q.q.grid(), q.q.values())?;
    let tf = t.to_f64_lossy();
    sampler.check_time(tf)?;
    let u0f = u0.cast::<f64>();
    let o = origin_stencil(u0f.grid())?;
    let q0 = sampler.value(0.0);
    let (r, l) = one_sided_derivatives(&u0f, o);
    let h1 = sobolev_norm(&u0f, 1.0, NormOptions::lenient())?;
    let defect = (r - l - q0).norm();
    if defect > DOMAIN_TOLERANCE * h1.max(1.0) {
        return Err(LabError::NotInDomain(format!(
            "jump of u0 at the origin misses q(0) by {defect:.3e}"
        )));
    }
    let c = -q0 * 0.5;
    let smooth = u0f.map(|x, v| v - c * (-x.abs()).exp());
    let spec_w = dft(&smooth)?;
    let n = spec_w.values().len();
    let freqs: Vec<f64> = (0..n).map(|k| spec_w.frequency(k)).collect();
    let cell = n as f64 * spec_w.frequency_grid().step();
    let m_tail = opts.tail_terms.max(opts.alias_terms) as i64;
    let mut spec = spec_w.clone();
    for (k, v) in spec.values_mut().iter_mut().enumerate() {
        let xi = freqs[k];
        let mut acc = Complex64::cis(-tf * xi * xi) * xi * xi * *v;
        for m in -m_tail..=m_tail {
            let z = xi + m as f64 * cell;
            let w = z * z;
            acc += Complex64::cis(-tf * w) * q0 / (1.0 + w);
        }
        *v = acc;
    }
    if tf != 0.0 {
        let dq = sampler.derivative();
        let far = (dq.value(tf), dq.value(0.0));
        let src = folded_source(&freqs, cell, &dq, tf, far, Complex64::new(1.0, 0.0), &opts);
        for (v, s) in spec.values_mut().iter_mut().zip(src) {
            *v += s;
        }
    }
    let out = idft(&spec)?;
    Ok(ComplexSignal::new(*u0.grid(), out.values().iter().map(|z| from_c64(*z)).collect(), Axis::Space)?)
}

/// Mass, `H^1` norm and discrete modulus of continuity of a field.
pub fn mass_and_h1<T: Real>(field: &WaveField<T>) -> Result<FieldDiagnostics<T>> {
    let mut snapshots = Vec::with_capacity(field.len());
    for (k, u) in field.snapshots.iter().enumerate() {
        let mut d = snapshot_diagnostics(field.times.point(k), u)?;
        d.jump_residual = field.diagnostics.get(k).and_then(|e| e.jump_residual);
        snapshots.push(d);
    }
    let mut modulus = T::zero();
    for pair in field.snapshots.windows(2) {
        let step = sobolev_norm(&pair[1].sub(&pair[0])?, T::one(), NormOptions::lenient())?;
        modulus = modulus.max(step);
    }
    let m0 = snapshots.first().map(|d| d.mass).unwrap_or(T::zero());
    let mass_drift = if m0 > T::zero() {
        snapshots.iter().fold(T::zero(), |a, d| a.max((d.mass - m0).abs() / m0))
    } else {
        T::zero()
    };
    let h1_max = snapshots.iter().fold(T::zero(), |a, d| a.max(d.h1));
    Ok(FieldDiagnostics { snapshots, mass_drift, h1_max, modulus_of_continuity: modulus })
}
