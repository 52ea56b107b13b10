//! The scalar charge equation `q = q0 + L_alpha q` and its two solvers.
//!
//! `L q(t) = sqrt(pi) e^{-i pi/4} \int_0^t q(s) (t-s)^{-1/2} ds` for `t > 0`, and
//! `-sqrt(pi) e^{i pi/4} \int_t^0 q(s) (s-t)^{-1/2} ds` for `t < 0` (the
//! orientation of `\int_0^t`). The physical coupling carries the inverse
//! transform factor: `L_alpha q = -i alpha_T L q / (2 pi)`, which is what makes
//! `q = alpha u(t, 0)` for the mild solution.
//!
//! Both solvers share one discretization: product integration of
//! `|t - s|^{-1/2}` against the piecewise-linear interpolant of `q`.

use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::constants::{abel_prefactor, backward_phase, forward_phase, trace_factor};
use crate::coupling::CouplingPath;
use crate::error::{LabError, Result};
use crate::propagator::{origin_trace_with, TraceOptions};
use crate::quadrature::abel_panel_weights;
use crate::scalar::Real;
use crate::signal::{fft_forward, fft_inverse, Axis, ComplexSignal, UniformGrid};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Picard,
    March,
}

/// Solver controls. `time_grid` must contain `t = 0` as a node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig<T> {
    pub tol: T,
    pub target_contraction: T,
    pub min_window: T,
    pub max_iterations: usize,
    pub time_grid: UniformGrid<T>,
    /// First Picard window length; `None` starts with the whole branch.
    pub initial_window: Option<T>,
    pub trace: TraceOptions,
}

impl<T: Real> SolverConfig<T> {
    pub fn new(time_grid: UniformGrid<T>) -> Self {
        Self {
            tol: T::lit(1e-10),
            target_contraction: T::lit(0.5),
            min_window: T::lit(1e-3),
            max_iterations: 500,
            time_grid,
            initial_window: None,
            trace: TraceOptions::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let pos = |v: T, name: &str| {
            if v > T::zero() && v.is_finite() {
                Ok(())
            } else {
                Err(LabError::Domain(format!("{name} must be positive, got {v}")))
            }
        };
        pos(self.tol, "tol")?;
        pos(self.target_contraction, "target_contraction")?;
        pos(self.min_window, "min_window")?;
        if self.target_contraction >= T::one() {
            return Err(LabError::Domain("target_contraction must be below 1".into()));
        }
        if self.max_iterations == 0 {
            return Err(LabError::Domain("max_iterations must be positive".into()));
        }
        origin_index(&self.time_grid)?;
        Ok(())
    }
}

impl<T: Real> Default for SolverConfig<T> {
    fn default() -> Self {
        Self::new(UniformGrid::spanning(T::zero(), T::one(), 2048).expect("static grid"))
    }
}

/// Solved charge with solver telemetry.
#[derive(Debug, Clone, PartialEq)]
pub struct ChargeSolution<T> {
    pub q: ComplexSignal<T>,
    pub q0: ComplexSignal<T>,
    pub method: Method,
    pub iterations_per_window: Vec<usize>,
    /// `(start, end)` of every accepted window, in solve order.
    pub windows: Vec<(T, T)>,
    /// Shortest accepted window.
    pub window_length: T,
    pub residual: T,
    /// Largest measured update ratio over the accepted windows (0 for marching).
    pub contraction_factor_estimate: T,
    pub contraction_per_window: Vec<T>,
    pub halvings: usize,
}

impl<T: Real> ChargeSolution<T> {
    /// `t, re q, im q, |q|` rows.
    pub fn write_csv<W: std::io::Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "t,re,im,abs")?;
        for (k, v) in self.q.values().iter().enumerate() {
            writeln!(w, "{},{},{},{}", self.q.grid().point(k), v.re, v.im, v.norm())?;
        }
        Ok(())
    }

    pub fn telemetry(&self) -> serde_json::Value {
        serde_json::json!({
            "method": self.method,
            "iterations_per_window": self.iterations_per_window,
            "windows": self.windows.iter().map(|(a, b)| [a.to_f64_lossy(), b.to_f64_lossy()]).collect::<Vec<_>>(),
            "window_length": self.window_length.to_f64_lossy(),
            "residual": self.residual.to_f64_lossy(),
            "contraction_factor_estimate": self.contraction_factor_estimate.to_f64_lossy(),
            "contraction_per_window": self.contraction_per_window.iter().map(|c| c.to_f64_lossy()).collect::<Vec<_>>(),
            "halvings": self.halvings,
        })
    }
}

fn origin_index<T: Real>(grid: &UniformGrid<T>) -> Result<usize> {
    grid.node_of(T::zero())
        .ok_or_else(|| LabError::InvalidGrid("time grid must contain t = 0 as a node".into()))
}

/// Product-integration weights of `\int_0^{t_k} (t_k - s)^{-1/2} q(s) ds` in unit step.
#[derive(Debug, Clone)]
struct AbelTable<T> {
    near: Vec<T>,
    far: Vec<T>,
    /// interior coefficient `near[d] + far[d - 1]`
    inner: Vec<T>,
}

impl<T: Real> AbelTable<T> {
    fn new(max_lag: usize) -> Self {
        let mut near = Vec::with_capacity(max_lag + 1);
        let mut far = Vec::with_capacity(max_lag + 1);
        for m in 0..=max_lag {
            let (a, b) = abel_panel_weights(m);
            near.push(T::lit(a));
            far.push(T::lit(b));
        }
        let inner = (0..=max_lag).map(|d| if d == 0 { near[0] } else { near[d] + far[d - 1] }).collect();
        Self { near, far, inner }
    }

    /// Coefficient of `q_j` in the integral up to node `k`.
    #[inline]
    fn coefficient(&self, k: usize, j: usize) -> T {
        let d = k - j;
        match (j, d) {
            (0, 0) => T::zero(),
            (0, _) => self.far[d - 1],
            (_, 0) => self.near[0],
            _ => self.inner[d],
        }
    }

    /// `sum_{j <= k} W(k, j) q_j` over the slice `q[0..=k]`.
    fn apply_row(&self, k: usize, q: &[Complex<T>]) -> Complex<T> {
        if k == 0 {
            return Complex::new(T::zero(), T::zero());
        }
        let mut acc = q[0] * self.far[k - 1] + q[k] * self.near[0];
        for j in 1..k {
            acc += q[j] * self.inner[k - j];
        }
        acc
    }
}

/// The discretized operator on one time grid.
#[derive(Debug, Clone)]
pub struct ChargeOperator<T> {
    grid: UniformGrid<T>,
    origin: usize,
    table: AbelTable<T>,
    /// `include_coupling` multipliers per node: `-i alpha_T(t) / (2 pi)` or 1.
    coupling: Vec<Complex<T>>,
}

impl<T: Real> ChargeOperator<T> {
    /// The bare operator `L`.
    pub fn bare(grid: &UniformGrid<T>) -> Result<Self> {
        let origin = origin_index(grid)?;
        let lag = origin.max(grid.count() - 1 - origin);
        let coupling = vec![Complex::new(T::one(), T::zero()); grid.count()];
        Ok(Self { grid: *grid, origin, table: AbelTable::new(lag), coupling })
    }

    /// `L_alpha = -i alpha_T L / (2 pi)` from truncated coupling samples.
    pub fn coupled(grid: &UniformGrid<T>, alpha_t: &[T]) -> Result<Self> {
        if alpha_t.len() != grid.count() {
            return Err(LabError::GridMismatch(format!(
                "{} coupling samples for {} nodes",
                alpha_t.len(),
                grid.count()
            )));
        }
        let mut op = Self::bare(grid)?;
        let c = trace_factor::<T>();
        op.coupling = alpha_t.iter().map(|&a| Complex::new(T::zero(), -a * c)).collect();
        Ok(op)
    }

    pub fn grid(&self) -> &UniformGrid<T> {
        &self.grid
    }

    pub fn origin(&self) -> usize {
        self.origin
    }

    fn branch_scale(&self, forward: bool) -> Complex<T> {
        let s = abel_prefactor::<T>() * self.grid.step().sqrt();
        if forward {
            forward_phase::<T>() * s
        } else {
            -backward_phase::<T>() * s
        }
    }

    /// Branch as local sequence starting at the origin.
    fn branch_values(&self, q: &[Complex<T>], forward: bool) -> Vec<Complex<T>> {
        if forward {
            q[self.origin..].to_vec()
        } else {
            q[..=self.origin].iter().rev().copied().collect()
        }
    }

    fn global_index(&self, local: usize, forward: bool) -> usize {
        if forward {
            self.origin + local
        } else {
            self.origin - local
        }
    }

    fn branch_len(&self, forward: bool) -> usize {
        if forward {
            self.grid.count() - self.origin
        } else {
            self.origin + 1
        }
    }

    /// Applies the operator to node values.
    pub fn apply(&self, q: &[Complex<T>]) -> Vec<Complex<T>> {
        let mut out = vec![Complex::new(T::zero(), T::zero()); q.len()];
        for forward in [true, false] {
            let local = self.branch_values(q, forward);
            let scale = self.branch_scale(forward);
            for k in 1..local.len() {
                let g = self.global_index(k, forward);
                out[g] = self.coupling[g] * scale * self.table.apply_row(k, &local);
            }
        }
        out
    }

    pub fn apply_signal(&self, q: &ComplexSignal<T>) -> Result<ComplexSignal<T>> {
        check_same(&self.grid, q.grid())?;
        ComplexSignal::new(self.grid, self.apply(q.values()), Axis::Time)
    }

    /// `||q - q0 - A q|| / ||q||` (absolute when `q = 0`).
    pub fn residual(&self, q: &[Complex<T>], q0: &[Complex<T>]) -> T {
        let aq = self.apply(q);
        let mut num = T::zero();
        let mut den = T::zero();
        for k in 0..q.len() {
            num += (q[k] - q0[k] - aq[k]).norm_sqr();
            den += q[k].norm_sqr();
        }
        if den > T::zero() {
            (num / den).sqrt()
        } else {
            num.sqrt()
        }
    }

    /// Diagonal coefficient of the unknown at local node `k`.
    fn diagonal(&self, k: usize, forward: bool) -> Complex<T> {
        let g = self.global_index(k, forward);
        self.coupling[g] * self.branch_scale(forward) * self.table.near[0]
    }

    /// Time-marching solve of `q = q0 + A q`.
    pub fn march(&self, q0: &[Complex<T>]) -> Result<Vec<Complex<T>>> {
        let mut q = q0.to_vec();
        for forward in [true, false] {
            let n = self.branch_len(forward);
            let scale = self.branch_scale(forward);
            let mut local = self.branch_values(q0, forward);
            for k in 1..n {
                let g = self.global_index(k, forward);
                let c = self.coupling[g] * scale;
                local[k] = Complex::new(T::zero(), T::zero());
                let history = self.table.apply_row(k, &local);
                let d = Complex::new(T::one(), T::zero()) - self.diagonal(k, forward);
                if d.norm() < T::lit(1e-12) {
                    return Err(LabError::NearSingular { node: g, modulus: d.norm().to_f64_lossy() });
                }
                local[k] = (q0[g] + c * history) / d;
                q[g] = local[k];
            }
        }
        Ok(q)
    }

    /// Windowed Picard iteration with contraction-driven window halving.
    /// `widths` holds the first window, in nodes, of the forward and backward branch.
    fn picard(&self, q0: &[Complex<T>], cfg: &SolverConfig<T>, widths: [usize; 2]) -> Result<PicardRun<T>> {
        let h = self.grid.step();
        let mut q = q0.to_vec();
        let mut run = PicardRun {
            iterations: Vec::new(),
            windows: Vec::new(),
            ratios: Vec::new(),
            halvings: 0,
            shortest: T::infinity(),
            q: Vec::new(),
        };
        for forward in [true, false] {
            let n = self.branch_len(forward);
            if n < 2 {
                continue;
            }
            let scale = self.branch_scale(forward);
            let mut local = self.branch_values(q0, forward);
            let src = local.clone();
            let full = n - 1;
            let mut width = widths[usize::from(!forward)].clamp(1, full);
            let mut a = 0usize;
            while a < full {
                let b = (a + width).min(full);
                let coeffs: Vec<Complex<T>> =
                    (a + 1..=b).map(|k| self.coupling[self.global_index(k, forward)] * scale).collect();
                // frozen history from nodes 0..=a
                let history: Vec<Complex<T>> = (a + 1..=b)
                    .map(|k| (0..=a).fold(Complex::new(T::zero(), T::zero()), |acc, j| acc + local[j] * self.table.coefficient(k, j)))
                    .collect();
                for k in a + 1..=b {
                    local[k] = src[k];
                }
                let noise = T::epsilon() * T::lit(1e3);
                let mut prev_update = T::zero();
                let mut measured = T::zero();
                let mut iterations = 0usize;
                let restart;
                loop {
                    iterations += 1;
                    if iterations > cfg.max_iterations {
                        return Err(LabError::IterationCap(cfg.max_iterations));
                    }
                    let mut next = Vec::with_capacity(b - a);
                    for (i, k) in (a + 1..=b).enumerate() {
                        let mut acc = history[i];
                        for j in a + 1..=k {
                            acc += local[j] * self.table.coefficient(k, j);
                        }
                        next.push(src[k] + coeffs[i] * acc);
                    }
                    let mut du = T::zero();
                    let mut nq = T::zero();
                    for (i, k) in (a + 1..=b).enumerate() {
                        du += (next[i] - local[k]).norm_sqr();
                        nq += next[i].norm_sqr();
                        local[k] = next[i];
                    }
                    let (du, nq) = (du.sqrt(), nq.sqrt());
                    // ratios at round-off level carry no information
                    if iterations >= 2 && prev_update > noise * nq {
                        measured = du / prev_update;
                        if measured > T::one() && du > cfg.tol * nq {
                            restart = true;
                            break;
                        }
                    }
                    if du <= cfg.tol * nq {
                        restart = measured > cfg.target_contraction;
                        break;
                    }
                    prev_update = du;
                }
                if restart {
                    let half = width / 2;
                    let len = T::from_usize_lossy(half) * h;
                    if half == 0 || len < cfg.min_window {
                        return Err(LabError::Stiffness {
                            window: len.to_f64_lossy(),
                            min_window: cfg.min_window.to_f64_lossy(),
                            factor: measured.to_f64_lossy(),
                        });
                    }
                    width = half;
                    run.halvings += 1;
                    continue;
                }
                let (ta, tb) = (self.grid.point(self.global_index(a, forward)), self.grid.point(self.global_index(b, forward)));
                run.windows.push((ta, tb));
                run.iterations.push(iterations);
                run.ratios.push(measured);
                run.shortest = run.shortest.min(T::from_usize_lossy(b - a) * h);
                a = b;
            }
            for (k, v) in local.iter().enumerate() {
                q[self.global_index(k, forward)] = *v;
            }
        }
        run.q = q;
        Ok(run)
    }
}

struct PicardRun<T> {
    iterations: Vec<usize>,
    windows: Vec<(T, T)>,
    ratios: Vec<T>,
    halvings: usize,
    shortest: T,
    q: Vec<Complex<T>>,
}

fn check_same<T: Real>(a: &UniformGrid<T>, b: &UniformGrid<T>) -> Result<()> {
    let tol = T::lit(1e-9) * a.step();
    if a.count() != b.count() || (a.step() - b.step()).abs() > tol || (a.start() - b.start()).abs() > tol {
        return Err(LabError::GridMismatch("charge signal and operator grids differ".into()));
    }
    Ok(())
}

/// `L q` on the grid of `q`, which must vanish outside `[-horizon, horizon]`.
pub fn apply_l<T: Real>(q: &ComplexSignal<T>, horizon: T) -> Result<ComplexSignal<T>> {
    let peak = q.sup_norm();
    let floor = T::lit(1e-8) * peak;
    for (k, v) in q.values().iter().enumerate() {
        let t = q.grid().point(k);
        if t.abs() > horizon * (T::one() + T::lit(1e-12)) && v.norm() > floor {
            return Err(LabError::SupportViolation {
                ratio: (v.norm() / peak).to_f64_lossy(),
                floor: 1e-8,
            });
        }
    }
    ChargeOperator::bare(q.grid())?.apply_signal(q)
}

/// `L_alpha q = -i alpha_T L q / (2 pi)` on the grid of `q`.
pub fn apply_l_alpha<T: Real>(q: &ComplexSignal<T>, alpha: &CouplingPath<T>) -> Result<ComplexSignal<T>> {
    let alpha_t = alpha.truncated_on(q.grid());
    ChargeOperator::coupled(q.grid(), &alpha_t)?.apply_signal(q)
}

/// `q0(t) = alpha_T(t) (e^{it Delta} u0)(0)`.
pub fn assemble_q0<T: Real>(
    alpha: &CouplingPath<T>,
    u0: &ComplexSignal<T>,
    time_grid: &UniformGrid<T>,
    trace: TraceOptions,
) -> Result<ComplexSignal<T>> {
    let alpha_t = alpha.truncated_on(time_grid);
    if alpha_t.iter().all(|a| *a == T::zero()) {
        return Ok(ComplexSignal::zeros(*time_grid, Axis::Time));
    }
    let tr = origin_trace_with(u0, time_grid, trace)?;
    let values = tr.values.iter().zip(&alpha_t).map(|(v, a)| *v * *a).collect();
    ComplexSignal::new(*time_grid, values, Axis::Time)
}

pub fn solve_picard<T: Real>(
    alpha: &CouplingPath<T>,
    u0: &ComplexSignal<T>,
    cfg: &SolverConfig<T>,
) -> Result<ChargeSolution<T>> {
    cfg.validate()?;
    let q0 = assemble_q0(alpha, u0, &cfg.time_grid, cfg.trace)?;
    solve_with_source(&alpha.truncated_on(&cfg.time_grid), &q0, cfg, Method::Picard)
}

pub fn solve_march<T: Real>(
    alpha: &CouplingPath<T>,
    u0: &ComplexSignal<T>,
    cfg: &SolverConfig<T>,
) -> Result<ChargeSolution<T>> {
    cfg.validate()?;
    let q0 = assemble_q0(alpha, u0, &cfg.time_grid, cfg.trace)?;
    solve_with_source(&alpha.truncated_on(&cfg.time_grid), &q0, cfg, Method::March)
}

pub fn solve<T: Real>(
    alpha: &CouplingPath<T>,
    u0: &ComplexSignal<T>,
    cfg: &SolverConfig<T>,
    method: Method,
) -> Result<ChargeSolution<T>> {
    match method {
        Method::Picard => solve_picard(alpha, u0, cfg),
        Method::March => solve_march(alpha, u0, cfg),
    }
}

/// Solves `q = q0 + L_alpha q` for given truncated coupling samples and source.
pub fn solve_with_source<T: Real>(
    alpha_t: &[T],
    q0: &ComplexSignal<T>,
    cfg: &SolverConfig<T>,
    method: Method,
) -> Result<ChargeSolution<T>> {
    cfg.validate()?;
    check_same(&cfg.time_grid, q0.grid())?;
    let op = ChargeOperator::coupled(&cfg.time_grid, alpha_t)?;
    let (q, iterations, windows, ratios, halvings, shortest) = match method {
        Method::March => {
            let q = op.march(q0.values())?;
            let g = &cfg.time_grid;
            (q, vec![1], vec![(g.start(), g.last())], vec![T::zero()], 0, g.last() - g.start())
        }
        Method::Picard => {
            let widths = picard_widths(alpha_t, cfg);
            let run = op.picard(q0.values(), cfg, widths)?;
            let shortest = if run.shortest.is_finite() { run.shortest } else { T::zero() };
            let PicardRun { iterations, windows, ratios, halvings, q, .. } = run;
            (q, iterations, windows, ratios, halvings, shortest)
        }
    };
    let residual = op.residual(&q, q0.values());
    let contraction = ratios.iter().fold(T::zero(), |a, &b| a.max(b));
    Ok(ChargeSolution {
        q: ComplexSignal::new(cfg.time_grid, q, Axis::Time)?,
        q0: q0.clone(),
        method,
        iterations_per_window: iterations,
        windows,
        window_length: shortest,
        residual,
        contraction_factor_estimate: contraction,
        contraction_per_window: ratios,
        halvings,
    })
}

/// Options of the operator-norm estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContractionOptions {
    pub nodes: usize,
    pub iterations: usize,
    pub seed: u64,
    /// Sobolev exponent of the norm.
    pub sobolev: f64,
}

impl Default for ContractionOptions {
    fn default() -> Self {
        Self { nodes: 256, iterations: 40, seed: 17, sobolev: 0.25 }
    }
}

/// Empirical `H^{1/4}` operator norm of `L_alpha` on functions supported in `[0, window]`.
pub fn contraction_estimate<T: Real>(alpha: &CouplingPath<T>, window: T) -> T {
    contraction_estimate_with(alpha, window, ContractionOptions::default())
}

pub fn contraction_estimate_with<T: Real>(alpha: &CouplingPath<T>, window: T, opts: ContractionOptions) -> T {
    T::lit(operator_norm(|t| alpha.truncated(T::lit(t)).to_f64_lossy(), window.to_f64_lossy(), opts))
}

/// Estimate below which an automatic first Picard window is accepted.
const AUTO_WINDOW_NORM: f64 = 0.9;

/// First Picard window per branch, in nodes.
fn picard_widths<T: Real>(alpha_t: &[T], cfg: &SolverConfig<T>) -> [usize; 2] {
    let grid = &cfg.time_grid;
    let h = grid.step().to_f64_lossy();
    let origin = grid.node_of(T::zero()).unwrap_or(0);
    let full = [grid.count() - 1 - origin, origin];
    if let Some(w) = cfg.initial_window {
        let nodes = (w.to_f64_lossy() / h).round().max(1.0) as usize;
        return [nodes, nodes];
    }
    let samples: Vec<f64> = alpha_t.iter().map(|a| a.to_f64_lossy()).collect();
    let min_window = cfg.min_window.to_f64_lossy();
    let opts = ContractionOptions { nodes: 128, iterations: 20, ..Default::default() };
    let mut out = full;
    for (b, forward) in [true, false].into_iter().enumerate() {
        let at = |t: f64| {
            let x = (t / h).clamp(0.0, full[b] as f64);
            let i = (x.floor() as usize).min(full[b].saturating_sub(1));
            let f = x - i as f64;
            let idx = |k: usize| if forward { origin + k } else { origin - k };
            if full[b] == 0 {
                return samples[origin];
            }
            samples[idx(i)] * (1.0 - f) + samples[idx(i + 1)] * f
        };
        let mut w = full[b];
        while w > 1 && (w as f64 * h) / 2.0 >= min_window {
            if operator_norm(at, w as f64 * h, opts) < AUTO_WINDOW_NORM {
                break;
            }
            w /= 2;
        }
        out[b] = w.max(1);
    }
    out
}

fn operator_norm(alpha: impl Fn(f64) -> f64, w: f64, opts: ContractionOptions) -> f64 {
    let n = opts.nodes.max(8);
    let Ok(grid) = UniformGrid::<f64>::spanning(0.0, w, n) else {
        return f64::INFINITY;
    };
    let alpha_t: Vec<f64> = grid.points().map(alpha).collect();
    if alpha_t.iter().all(|a| *a == 0.0) {
        return 0.0;
    }
    let Ok(op) = ChargeOperator::coupled(&grid, &alpha_t) else {
        return f64::INFINITY;
    };
    let gram = Gram::new(&grid, opts.sobolev);
    // A^H as an explicit matrix transpose
    let mat: Vec<Vec<Complex<f64>>> = (0..n)
        .map(|j| {
            let mut e = vec![Complex::new(0.0, 0.0); n];
            e[j] = Complex::new(1.0, 0.0);
            op.apply(&e)
        })
        .collect();
    let apply_adj = |v: &[Complex<f64>]| -> Vec<Complex<f64>> {
        (0..n).map(|j| mat[j].iter().zip(v).map(|(a, b)| a.conj() * b).sum()).collect()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    // band-limited random probe
    let mut v: Vec<Complex<f64>> = (0..n)
        .map(|k| {
            let t = k as f64 / (n - 1) as f64;
            (1..=8).fold(Complex::new(0.0, 0.0), |acc, m| {
                let c = Complex::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
                acc + c * (std::f64::consts::PI * m as f64 * t).sin()
            }) + Complex::new(rng.gen_range(0.5..1.0), 0.0)
        })
        .collect();
    let mut lambda = 0.0;
    for _ in 0..opts.iterations {
        let gv = gram.apply(&v);
        let norm_v: f64 = dot(&v, &gv).re;
        if !(norm_v > 0.0) || !norm_v.is_finite() {
            return f64::INFINITY;
        }
        let s = norm_v.sqrt().recip();
        v.iter_mut().for_each(|x| *x *= s);
        let av = op.apply(&v);
        let gav = gram.apply(&av);
        lambda = dot(&av, &gav).re;
        if !lambda.is_finite() {
            return f64::INFINITY;
        }
        let z = apply_adj(&gav);
        match gram.solve(&z) {
            Some(next) => v = next,
            None => return f64::INFINITY,
        }
    }
    lambda.max(0.0).sqrt()
}

fn dot(a: &[Complex<f64>], b: &[Complex<f64>]) -> Complex<f64> {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

/// Gram matrix of the `H^s` inner product for zero-extended window samples.
struct Gram {
    n: usize,
    len: usize,
    weights: Vec<f64>,
}

impl Gram {
    fn new(grid: &UniformGrid<f64>, s: f64) -> Self {
        let n = grid.count();
        let len = (4 * n).next_power_of_two();
        let h = grid.step();
        let dxi = std::f64::consts::TAU / (len as f64 * h);
        let weights = (0..len)
            .map(|k| {
                let kk = if k < len / 2 { k as f64 } else { k as f64 - len as f64 };
                let xi = kk * dxi;
                (1.0 + xi * xi).powf(s) * h / len as f64
            })
            .collect();
        Self { n, len, weights }
    }

    fn apply(&self, v: &[Complex<f64>]) -> Vec<Complex<f64>> {
        let mut buf = vec![Complex::new(0.0, 0.0); self.len];
        buf[..self.n].copy_from_slice(v);
        fft_forward(&mut buf);
        for (b, w) in buf.iter_mut().zip(&self.weights) {
            *b *= *w;
        }
        fft_inverse(&mut buf);
        buf.truncate(self.n);
        buf
    }

    /// Conjugate gradients on the Hermitian positive definite Gram matrix.
    fn solve(&self, b: &[Complex<f64>]) -> Option<Vec<Complex<f64>>> {
        let mut x = vec![Complex::new(0.0, 0.0); self.n];
        let mut r = b.to_vec();
        let mut p = r.clone();
        let mut rr = dot(&r, &r).re;
        let bb = rr;
        if bb == 0.0 {
            return Some(x);
        }
        for _ in 0..10 * self.n {
            let ap = self.apply(&p);
            let pap = dot(&p, &ap).re;
            if !(pap > 0.0) {
                return None;
            }
            let a = rr / pap;
            for i in 0..self.n {
                x[i] += p[i] * a;
                r[i] -= ap[i] * a;
            }
            let rr_new = dot(&r, &r).re;
            if rr_new <= 1e-24 * bb {
                return Some(x);
            }
            let beta = rr_new / rr;
            for i in 0..self.n {
                p[i] = r[i] + p[i] * beta;
            }
            rr = rr_new;
        }
        Some(x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn unit_grid(n: usize) -> UniformGrid<f64> {
        UniformGrid::spanning(0.0, 1.0, n).unwrap()
    }

    #[test]
    fn bare_operator_on_constants_and_ramps() {
        let g = unit_grid(101);
        let one = ComplexSignal::from_real_fn(g, Axis::Time, |_| 1.0);
        let lq = apply_l(&one, 1.0).unwrap();
        let ramp = ComplexSignal::from_real_fn(g, Axis::Time, |s| s);
        let lr = apply_l(&ramp, 1.0).unwrap();
        let pref = forward_phase::<f64>() * PI.sqrt();
        for (k, t) in g.points().enumerate() {
            assert!((lq.values()[k] - pref * 2.0 * t.sqrt()).norm() < 1e-12);
            assert!((lr.values()[k] - pref * (4.0 / 3.0) * t.powf(1.5)).norm() < 1e-12);
        }
    }

    #[test]
    fn backward_branch_uses_the_physical_orientation() {
        let g = UniformGrid::<f64>::spanning(-1.0, 1.0, 201).unwrap();
        let one = ComplexSignal::from_real_fn(g, Axis::Time, |_| 1.0);
        let lq = apply_l(&one, 1.0).unwrap();
        let back = -backward_phase::<f64>() * PI.sqrt();
        for (k, t) in g.points().enumerate() {
            if t < 0.0 {
                assert!((lq.values()[k] - back * 2.0 * (-t).sqrt()).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn support_violation_is_reported() {
        let g = UniformGrid::<f64>::spanning(0.0, 2.0, 21).unwrap();
        let one = ComplexSignal::from_real_fn(g, Axis::Time, |_| 1.0);
        assert!(matches!(apply_l(&one, 1.0), Err(LabError::SupportViolation { .. })));
        assert!(apply_l(&ComplexSignal::zeros(g, Axis::Time), 1.0).unwrap().sup_norm() == 0.0);
    }

    #[test]
    fn grid_without_origin_is_rejected() {
        let g = UniformGrid::<f64>::spanning(0.5, 1.0, 11).unwrap();
        let one = ComplexSignal::from_real_fn(g, Axis::Time, |_| 1.0);
        assert!(matches!(apply_l(&one, 1.0), Err(LabError::InvalidGrid(_))));
    }

    #[test]
    fn coupled_operator_is_bare_operator_times_coupling() {
        let g = unit_grid(64);
        let alpha = CouplingPath::closed_form(|t: f64| 1.0 + t.sin(), g, 4.0, f64::INFINITY).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let values = (0..64).map(|_| Complex::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
        let q = ComplexSignal::new(g, values, Axis::Time).unwrap();
        let la = apply_l_alpha(&q, &alpha).unwrap();
        let l = apply_l(&q, 1.0).unwrap();
        for (k, t) in g.points().enumerate() {
            let expected = Complex::new(0.0, -alpha.truncated(t)) * l.values()[k] / (2.0 * PI);
            assert!((la.values()[k] - expected).norm() < 1e-12);
            assert!(la.values()[k].norm() <= alpha.truncated(t).abs() * l.values()[k].norm() + 1e-15);
        }
    }

    fn manufactured(method: Method) -> f64 {
        let g = unit_grid(513);
        let mut cfg = SolverConfig::new(g);
        cfg.tol = 1e-13;
        let alpha = CouplingPath::closed_form(|t: f64| -2.0 + t.cos(), g, 4.0, f64::INFINITY).unwrap();
        let at = alpha.truncated_on(&g);
        let exact = ComplexSignal::from_real_fn(g, Axis::Time, |t| t * (-t).exp());
        let op = ChargeOperator::coupled(&g, &at).unwrap();
        let lq = op.apply(exact.values());
        let q0: Vec<_> = exact.values().iter().zip(&lq).map(|(a, b)| a - b).collect();
        let q0 = ComplexSignal::new(g, q0, Axis::Time).unwrap();
        let sol = solve_with_source(&at, &q0, &cfg, method).unwrap();
        sol.q.relative_distance(&exact).unwrap()
    }

    #[test]
    fn manufactured_solution_is_recovered() {
        assert!(manufactured(Method::March) < 1e-12);
        assert!(manufactured(Method::Picard) < 1e-10);
    }

    #[test]
    fn zero_coupling_gives_zero_charge_in_one_iteration() {
        let g = unit_grid(65);
        let cfg = SolverConfig::new(g);
        let q0 = ComplexSignal::zeros(g, Axis::Time);
        let sol = solve_with_source(&vec![0.0; 65], &q0, &cfg, Method::Picard).unwrap();
        assert_eq!(sol.iterations_per_window, vec![1]);
        assert_eq!(sol.q.sup_norm(), 0.0);
        assert_eq!(contraction_estimate(&CouplingPath::zero(g, 4.0).unwrap(), 1.0), 0.0);
    }

    #[test]
    fn picard_halves_for_strong_coupling() {
        let g = unit_grid(257);
        let mut cfg = SolverConfig::new(g);
        cfg.initial_window = Some(1.0);
        let at = vec![-10.0; 257];
        let q0 = ComplexSignal::from_real_fn(g, Axis::Time, |t| (3.0 * t).cos());
        let sol = solve_with_source(&at, &q0, &cfg, Method::Picard).unwrap();
        assert!(sol.halvings > 0);
        assert!(sol.contraction_per_window.iter().all(|c| *c <= 0.5));
        cfg.initial_window = None;
        let auto = solve_with_source(&at, &q0, &cfg, Method::Picard).unwrap();
        assert!(auto.halvings < sol.halvings);
        assert!(auto.q.relative_distance(&sol.q).unwrap() < 1e-8);
        assert!(sol.residual < 1e-9);
        let march = solve_with_source(&at, &q0, &cfg, Method::March).unwrap();
        assert!(sol.q.relative_distance(&march.q).unwrap() < 1e-8);
    }

    #[test]
    fn stiffness_is_reported_below_min_window() {
        let g = unit_grid(65);
        let mut cfg = SolverConfig::new(g);
        cfg.min_window = 0.5;
        let at = vec![-400.0; 65];
        let q0 = ComplexSignal::from_real_fn(g, Axis::Time, |_| 1.0);
        assert!(matches!(solve_with_source(&at, &q0, &cfg, Method::Picard), Err(LabError::Stiffness { .. })));
    }

    #[test]
    fn two_sided_grid_solves_both_branches() {
        let g = UniformGrid::<f64>::spanning(-0.5, 0.5, 201).unwrap();
        let cfg = SolverConfig::new(g);
        let at: Vec<f64> = g.points().map(|t| -2.0 + t).collect();
        let q0 = ComplexSignal::from_real_fn(g, Axis::Time, |t| (-t * t).exp());
        let p = solve_with_source(&at, &q0, &cfg, Method::Picard).unwrap();
        let m = solve_with_source(&at, &q0, &cfg, Method::March).unwrap();
        assert!(p.q.relative_distance(&m.q).unwrap() < 1e-9);
        assert!(m.residual < 1e-12);
    }
}
