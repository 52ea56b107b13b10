//! Ground truths independent of the charge pipeline: closed-form solutions
//! and a Crank-Nicolson finite-difference solver.

use num_complex::{Complex, Complex64};

use crate::coupling::CouplingPath;
use crate::error::{LabError, Result};
use crate::propagator::{from_c64, to_c64};
use crate::scalar::Real;
use crate::signal::{dft, fft_forward, fft_inverse, Axis, ComplexSignal, UniformGrid};
use crate::wavefield::{snapshot_diagnostics, Route, WaveField};

/// Eigenpair of `-d^2/dx^2 + alpha delta` for `alpha < 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundState<T: Real> {
    pub alpha: T,
    pub kappa: T,
    pub energy: T,
    pub profile: ComplexSignal<T>,
}

impl<T: Real> BoundState<T> {
    pub fn new(alpha: T, grid: UniformGrid<T>) -> Result<Self> {
        if !(alpha < T::zero()) {
            return Err(LabError::Domain(format!("a bound state needs alpha < 0, got {alpha}")));
        }
        let kappa = -alpha / T::lit(2.0);
        let amp = kappa.sqrt();
        let profile = ComplexSignal::from_real_fn(grid, Axis::Space, |x| amp * (-kappa * x.abs()).exp());
        Ok(Self { alpha, kappa, energy: -kappa * kappa, profile })
    }

    /// `psi'(0+) - psi'(0-) - alpha psi(0)` of the analytic profile.
    pub fn jump_defect(&self) -> T {
        let two = T::lit(2.0);
        -two * self.kappa.powf(T::lit(1.5)) - self.alpha * self.kappa.sqrt()
    }

    pub fn at(&self, t: T) -> ComplexSignal<T> {
        let phase = Complex::from_polar(T::one(), -self.energy * t);
        self.profile.scale(phase)
    }
}

/// `e^{-iEt} sqrt(kappa) e^{-kappa |x|}`.
pub fn bound_state_evolution<T: Real>(alpha: T, t: T, grid: UniformGrid<T>) -> Result<ComplexSignal<T>> {
    Ok(BoundState::new(alpha, grid)?.at(t))
}

/// `(pi w^2)^{-1/4} e^{ik(x - x0)} e^{-(x - x0)^2 / 2w^2}` and its free evolution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianPacket {
    pub width: f64,
    pub center: f64,
    pub momentum: f64,
}

impl GaussianPacket {
    pub fn new(width: f64, center: f64, momentum: f64) -> Result<Self> {
        if !(width > 0.0) {
            return Err(LabError::Domain(format!("Gaussian width must be positive, got {width}")));
        }
        Ok(Self { width, center, momentum })
    }

    pub fn value(&self, t: f64, x: f64) -> Complex64 {
        let w2 = self.width * self.width;
        let k = self.momentum;
        let sigma = Complex64::new(w2, 2.0 * t);
        let y = x - self.center - 2.0 * k * t;
        let amp = (std::f64::consts::PI * w2).powf(-0.25) * (Complex64::new(w2, 0.0) / sigma).sqrt();
        let phase = Complex64::new(0.0, k * (x - self.center) - k * k * t);
        amp * (phase - y * y / (2.0 * sigma)).exp()
    }

    pub fn at<T: Real>(&self, t: T, grid: UniformGrid<T>) -> ComplexSignal<T> {
        let tf = t.to_f64_lossy();
        ComplexSignal::from_fn(grid, Axis::Space, |x| from_c64(self.value(tf, x.to_f64_lossy())))
    }
}

/// Free evolution of the centred unit-mass Gaussian of the given width.
pub fn free_gaussian<T: Real>(t: T, width: T, grid: UniformGrid<T>) -> Result<ComplexSignal<T>> {
    Ok(GaussianPacket::new(width.to_f64_lossy(), 0.0, 0.0)?.at(t, grid))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReferenceOptions {
    pub max_dt: f64,
    /// Spectral energy fraction allowed above the frequency used by the quality check.
    pub band_fraction: f64,
    /// Bound on `dt xi_max^2`.
    pub max_phase_step: f64,
    /// Bound on `h xi_max`.
    pub max_space_phase: f64,
}

impl Default for ReferenceOptions {
    fn default() -> Self {
        Self { max_dt: 1e-3, band_fraction: 1e-10, max_phase_step: 0.5, max_space_phase: 1.0 }
    }
}

/// `u0`'s grid refined `factor` times (a power of two) for the reference solver.
pub fn reference_space<T: Real>(grid: &UniformGrid<T>, factor: usize) -> Result<UniformGrid<T>> {
    if !factor.is_power_of_two() {
        return Err(LabError::NotPowerOfTwo(factor));
    }
    UniformGrid::new(grid.start(), grid.step() / T::from_usize_lossy(factor), grid.count() * factor)
}

/// Samples of `fine` at the nodes of `coarse`, which must be a subset of `fine`'s nodes.
pub fn restrict<T: Real>(fine: &ComplexSignal<T>, coarse: &UniformGrid<T>) -> Result<ComplexSignal<T>> {
    let g = fine.grid();
    let ratio = (coarse.step() / g.step()).to_f64_lossy();
    let offset = ((coarse.start() - g.start()) / g.step()).to_f64_lossy();
    let (r, o) = (ratio.round(), offset.round());
    if (ratio - r).abs() > 1e-9 || (offset - o).abs() > 1e-9 || r < 1.0 || o < 0.0 {
        return Err(LabError::GridMismatch("coarse nodes are not fine nodes".into()));
    }
    let (r, o) = (r as usize, o as usize);
    if o + r * (coarse.count() - 1) >= g.count() {
        return Err(LabError::GridMismatch("coarse grid extends past the fine grid".into()));
    }
    let values = (0..coarse.count()).map(|k| fine.values()[o + r * k]).collect();
    ComplexSignal::new(*coarse, values, fine.axis())
}

/// Transfers `u0` to `space`: trigonometric interpolation onto a power-of-two
/// refinement of the same window, linear interpolation otherwise.
fn transfer<T: Real>(u0: &ComplexSignal<T>, space: &UniformGrid<T>) -> Result<Vec<Complex64>> {
    let g = u0.grid();
    let n = g.count();
    let m = space.count();
    let same_window = (g.start() - space.start()).abs() <= T::lit(1e-12) * g.length().abs()
        && (g.length() - space.length()).abs() <= T::lit(1e-12) * g.length().abs();
    if same_window && m >= n && m % n == 0 && (m / n).is_power_of_two() && n.is_power_of_two() {
        let mut buf: Vec<Complex64> = u0.values().iter().map(|v| to_c64(*v)).collect();
        fft_forward(&mut buf);
        let mut wide = vec![Complex64::new(0.0, 0.0); m];
        let half = n / 2;
        for k in 0..half {
            wide[k] = buf[k];
        }
        for k in half + 1..n {
            wide[m - (n - k)] = buf[k];
        }
        if m > n {
            wide[half] = buf[half] * 0.5;
            wide[m - half] = buf[half] * 0.5;
        } else {
            wide[half] = buf[half];
        }
        fft_inverse(&mut wide);
        let s = 1.0 / n as f64;
        return Ok(wide.into_iter().map(|v| v * s).collect());
    }
    Ok(space
        .points()
        .map(|x| {
            if x < g.start() || x > g.last() {
                Complex64::new(0.0, 0.0)
            } else {
                to_c64(u0.interpolate(x))
            }
        })
        .collect())
}

/// Smallest `xi` with spectral energy above `|xi| > xi` at most `fraction` of the total.
fn band_radius<T: Real>(u0: &ComplexSignal<T>, fraction: f64) -> Result<f64> {
    let spec = dft(&u0.cast::<f64>())?;
    let mut pairs: Vec<(f64, f64)> =
        spec.values().iter().enumerate().map(|(k, v)| (spec.frequency(k).abs(), v.norm_sqr())).collect();
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0));
    let total: f64 = pairs.iter().map(|p| p.1).sum();
    if total == 0.0 {
        return Ok(0.0);
    }
    let mut acc = 0.0;
    for (xi, e) in pairs {
        acc += e;
        if acc > fraction * total {
            return Ok(xi);
        }
    }
    Ok(0.0)
}

/// Solves `(I + i dt/2 H) u_new = (I - i dt/2 H) u` for the tridiagonal `H`.
struct CnStepper {
    h: f64,
    origin: usize,
    scratch_c: Vec<Complex64>,
    scratch_d: Vec<Complex64>,
}

impl CnStepper {
    fn step(&mut self, u: &mut [Complex64], dt: f64, alpha: f64) {
        let n = u.len();
        let ih2 = 1.0 / (self.h * self.h);
        let r = Complex64::new(0.0, 0.5 * dt);
        let diag_h = |k: usize| 2.0 * ih2 + if k == self.origin { alpha / self.h } else { 0.0 };
        let off_h = -ih2;
        // right-hand side (I - r H) u with Dirichlet walls
        let d = &mut self.scratch_d;
        for k in 0..n {
            let left = if k > 0 { u[k - 1] } else { Complex64::new(0.0, 0.0) };
            let right = if k + 1 < n { u[k + 1] } else { Complex64::new(0.0, 0.0) };
            let hu = diag_h(k) * u[k] + off_h * (left + right);
            d[k] = u[k] - r * hu;
        }
        let a = r * off_h;
        let c = &mut self.scratch_c;
        let b0 = Complex64::new(1.0, 0.0) + r * diag_h(0);
        c[0] = a / b0;
        d[0] /= b0;
        for k in 1..n {
            let denom = Complex64::new(1.0, 0.0) + r * diag_h(k) - a * c[k - 1];
            c[k] = a / denom;
            d[k] = (d[k] - a * d[k - 1]) / denom;
        }
        u[n - 1] = d[n - 1];
        for k in (0..n - 1).rev() {
            u[k] = d[k] - c[k] * u[k + 1];
        }
    }
}

/// Crank-Nicolson solution of `i u_t = -u_xx + alpha_T(t) delta u` in a Dirichlet box.
///
/// The delta is `alpha_T(t_mid) / h` on the origin node.
pub fn crank_nicolson_reference<T: Real>(
    alpha: &CouplingPath<T>,
    u0: &ComplexSignal<T>,
    times: &UniformGrid<T>,
    space: &UniformGrid<T>,
) -> Result<WaveField<T>> {
    crank_nicolson_reference_with(alpha, u0, times, space, ReferenceOptions::default())
}

pub fn crank_nicolson_reference_with<T: Real>(
    alpha: &CouplingPath<T>,
    u0: &ComplexSignal<T>,
    times: &UniformGrid<T>,
    space: &UniformGrid<T>,
    opts: ReferenceOptions,
) -> Result<WaveField<T>> {
    let origin = space
        .node_of(T::zero())
        .ok_or_else(|| LabError::InvalidGrid("reference space grid must contain x = 0 as a node".into()))?;
    if space.count() < 3 {
        return Err(LabError::InvalidGrid("reference grid needs at least 3 nodes".into()));
    }
    let h = space.step().to_f64_lossy();
    let xi_max = band_radius(u0, opts.band_fraction)?;
    let tmax = times.points().map(|t| t.to_f64_lossy().abs()).fold(0.0, f64::max);
    let span = tmax.max(times.step().to_f64_lossy().abs());
    let steps_per_unit = (1.0 / opts.max_dt).ceil();
    let dt_nominal = 1.0 / steps_per_unit;
    if dt_nominal * xi_max * xi_max > opts.max_phase_step {
        return Err(LabError::StepRejected(format!(
            "dt xi_max^2 = {:.3} exceeds {} (xi_max = {xi_max:.3})",
            dt_nominal * xi_max * xi_max,
            opts.max_phase_step
        )));
    }
    if h * xi_max > opts.max_space_phase {
        return Err(LabError::StepRejected(format!(
            "h xi_max = {:.3} exceeds {} (xi_max = {xi_max:.3})",
            h * xi_max,
            opts.max_space_phase
        )));
    }
    log::debug!("reference solver: h = {h:.3e}, xi_max = {xi_max:.2}, span {span}");
    let mut u = transfer(u0, space)?;
    let n = u.len();
    let mut stepper = CnStepper {
        h,
        origin,
        scratch_c: vec![Complex64::new(0.0, 0.0); n],
        scratch_d: vec![Complex64::new(0.0, 0.0); n],
    };
    let mut now = 0.0f64;
    let mut snapshots = Vec::with_capacity(times.count());
    let mut diagnostics = Vec::with_capacity(times.count());
    for t in times.points() {
        let target = t.to_f64_lossy();
        let gap = target - now;
        let steps = (gap.abs() * steps_per_unit - 1e-9).ceil().max(0.0) as usize;
        if steps > 0 {
            let dt = gap / steps as f64;
            for k in 0..steps {
                let mid = now + (k as f64 + 0.5) * dt;
                let a = alpha.truncated(T::lit(mid)).to_f64_lossy();
                stepper.step(&mut u, dt, a);
            }
        }
        now = target;
        let snap = ComplexSignal::new(*space, u.iter().map(|v| from_c64(*v)).collect(), Axis::Space)?;
        diagnostics.push(snapshot_diagnostics(t, &snap)?);
        snapshots.push(snap);
    }
    Ok(WaveField { times: *times, space: *space, snapshots, route: Route::Reference, diagnostics })
}

/// Restricts every snapshot of a reference field to `coarse`.
pub fn restrict_field<T: Real>(field: &WaveField<T>, coarse: &UniformGrid<T>) -> Result<WaveField<T>> {
    let snapshots = field.snapshots.iter().map(|s| restrict(s, coarse)).collect::<Result<Vec<_>>>()?;
    let diagnostics = field
        .times
        .points()
        .zip(&snapshots)
        .map(|(t, s)| snapshot_diagnostics(t, s))
        .collect::<Result<Vec<_>>>()?;
    Ok(WaveField { times: field.times, space: *coarse, snapshots, route: field.route, diagnostics })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bound_state_examples() {
        let g = UniformGrid::<f64>::centered(40.0, 1024).unwrap();
        let b = BoundState::new(-2.0, g).unwrap();
        assert_eq!(b.kappa, 1.0);
        assert_eq!(b.energy, -1.0);
        assert!(b.jump_defect().abs() < 1e-15);
        let u = bound_state_evolution(-2.0, std::f64::consts::PI, g).unwrap();
        for (x, v) in g.points().zip(u.values()) {
            assert!((v + (-x.abs()).exp()).norm() < 1e-14);
        }
        assert!(BoundState::new(0.0, g).is_err());
    }

    #[test]
    fn gaussian_packet_keeps_unit_mass() {
        let g = UniformGrid::<f64>::centered(80.0, 4096).unwrap();
        let p = GaussianPacket::new(1.0, 5.0, -2.5).unwrap();
        for t in [0.0, 0.5, 2.0] {
            let u = p.at(t, g);
            assert!((u.l2_norm() - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn free_reference_is_unitary() {
        let coarse = UniformGrid::<f64>::centered(40.0, 512).unwrap();
        let space = reference_space(&coarse, 2).unwrap();
        let u0 = free_gaussian(0.0, 1.0, coarse).unwrap();
        let tg = UniformGrid::spanning(0.0, 1.0, 3).unwrap();
        let a = CouplingPath::zero(tg, 4.0).unwrap();
        let f = crank_nicolson_reference(&a, &u0, &tg, &space).unwrap();
        assert!(f.mass_drift() < 1e-10);
        let back = restrict(&f.snapshots[0], &coarse).unwrap();
        assert!(back.relative_distance(&u0).unwrap() < 1e-12);
    }

    #[test]
    fn quality_check_rejects_coarse_steps() {
        let g = UniformGrid::<f64>::centered(40.0, 1024).unwrap();
        let u0 = GaussianPacket::new(0.2, 0.0, 20.0).unwrap().at(0.0, g);
        let tg = UniformGrid::spanning(0.0, 1.0, 2).unwrap();
        let a = CouplingPath::zero(tg, 4.0).unwrap();
        let r = crank_nicolson_reference(&a, &u0, &tg, &g);
        assert!(matches!(r, Err(LabError::StepRejected(_))));
    }
}
