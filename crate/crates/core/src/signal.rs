//! Uniform grids, sampled complex signals, the continuous-convention discrete
//! Fourier transform and spectral Sobolev norms.
//!
//! The transform approximates `F f(xi) = \int e^{-i xi x} f(x) dx`; the inverse
//! carries the `1/(2 pi)` factor. Every module routes its transforms through
//! [`dft`], [`idft`] or [`apply_multiplier`] so the convention lives here only.

use std::fmt;
use std::io::{BufRead, Write};

use num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::scalar::{cis, Real};

/// Points `start + k * step` for `0 <= k < count`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UniformGrid<T> {
    start: T,
    step: T,
    count: usize,
}

impl<T: Real> UniformGrid<T> {
    pub fn new(start: T, step: T, count: usize) -> Result<Self> {
        if !(step > T::zero()) || !step.is_finite() {
            return Err(LabError::InvalidGrid(format!("step must be positive, got {step}")));
        }
        if count < 2 {
            return Err(LabError::InvalidGrid(format!("count must be at least 2, got {count}")));
        }
        if !start.is_finite() {
            return Err(LabError::InvalidGrid("start must be finite".into()));
        }
        Ok(Self { start, step, count })
    }

    /// Symmetric window `[-length/2, length/2)` with `count` points; the origin
    /// is the node `count / 2` when `count` is even.
    pub fn centered(length: T, count: usize) -> Result<Self> {
        let step = length / T::from_usize_lossy(count);
        Self::new(-step * T::from_usize_lossy(count / 2), step, count)
    }

    /// `count` points from `start` to `end` inclusive.
    pub fn spanning(start: T, end: T, count: usize) -> Result<Self> {
        if count < 2 {
            return Err(LabError::InvalidGrid(format!("count must be at least 2, got {count}")));
        }
        Self::new(start, (end - start) / T::from_usize_lossy(count - 1), count)
    }

    pub fn cast<U: Real>(&self) -> UniformGrid<U> {
        UniformGrid::new(U::lit(self.start.to_f64_lossy()), U::lit(self.step.to_f64_lossy()), self.count)
            .expect("a valid grid stays valid")
    }

    pub fn start(&self) -> T {
        self.start
    }

    pub fn step(&self) -> T {
        self.step
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn point(&self, k: usize) -> T {
        self.start + self.step * T::from_usize_lossy(k)
    }

    pub fn last(&self) -> T {
        self.point(self.count - 1)
    }

    /// Window length `count * step` (the period seen by the transform).
    pub fn length(&self) -> T {
        self.step * T::from_usize_lossy(self.count)
    }

    pub fn points(&self) -> impl Iterator<Item = T> + '_ {
        (0..self.count).map(move |k| self.point(k))
    }

    /// Index of the node sitting at `x` (within a tenth of a step), if any.
    pub fn node_of(&self, x: T) -> Option<usize> {
        let r = (x - self.start) / self.step;
        let k = r.round();
        if k < T::zero() || (r - k).abs() > T::lit(0.1) {
            return None;
        }
        let k = k.to_usize()?;
        (k < self.count).then_some(k)
    }

    pub fn is_power_of_two(&self) -> bool {
        self.count.is_power_of_two()
    }

    /// Frequency step `2 pi / (count * step)` of the transform of this grid.
    pub fn frequency_step(&self) -> T {
        T::TAU() / self.length()
    }

    /// Angular Nyquist frequency `pi / step`.
    pub fn nyquist(&self) -> T {
        T::PI() / self.step
    }

    /// Frequencies in FFT (natural) order: `0, dxi, ..., -dxi`.
    pub fn natural_frequencies(&self) -> Vec<T> {
        let n = self.count;
        let dxi = self.frequency_step();
        (0..n)
            .map(|k| {
                let kk = if k < n.div_ceil(2) { k as f64 } else { k as f64 - n as f64 };
                T::lit(kk) * dxi
            })
            .collect()
    }

    /// Centered frequency grid `[-n/2, n/2) * dxi`.
    pub fn frequency_grid(&self) -> UniformGrid<T> {
        let dxi = self.frequency_step();
        UniformGrid {
            start: -dxi * T::from_usize_lossy(self.count / 2),
            step: dxi,
            count: self.count,
        }
    }

    /// Same window, twice the samples.
    pub fn refined(&self) -> UniformGrid<T> {
        UniformGrid { start: self.start, step: self.step / T::lit(2.0), count: self.count * 2 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    Time,
    Space,
    Frequency,
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Axis::Time => "time",
            Axis::Space => "space",
            Axis::Frequency => "frequency",
        })
    }
}

impl std::str::FromStr for Axis {
    type Err = LabError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "time" => Ok(Axis::Time),
            "space" => Ok(Axis::Space),
            "frequency" => Ok(Axis::Frequency),
            other => Err(LabError::Parse(format!("unknown axis '{other}'"))),
        }
    }
}

/// Uniformly sampled complex function of one real variable.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexSignal<T> {
    grid: UniformGrid<T>,
    values: Vec<Complex<T>>,
    axis: Axis,
}

impl<T: Real> ComplexSignal<T> {
    pub fn new(grid: UniformGrid<T>, values: Vec<Complex<T>>, axis: Axis) -> Result<Self> {
        if values.len() != grid.count() {
            return Err(LabError::GridMismatch(format!(
                "{} values for a grid of {} points",
                values.len(),
                grid.count()
            )));
        }
        Ok(Self { grid, values, axis })
    }

    pub fn from_fn(grid: UniformGrid<T>, axis: Axis, f: impl Fn(T) -> Complex<T>) -> Self {
        let values = grid.points().map(f).collect();
        Self { grid, values, axis }
    }

    pub fn from_real_fn(grid: UniformGrid<T>, axis: Axis, f: impl Fn(T) -> T) -> Self {
        Self::from_fn(grid, axis, |x| Complex::new(f(x), T::zero()))
    }

    pub fn zeros(grid: UniformGrid<T>, axis: Axis) -> Self {
        Self { grid, values: vec![Complex::new(T::zero(), T::zero()); grid.count()], axis }
    }

    pub fn grid(&self) -> &UniformGrid<T> {
        &self.grid
    }

    pub fn axis(&self) -> Axis {
        self.axis
    }

    pub fn values(&self) -> &[Complex<T>] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Complex<T>] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<Complex<T>> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Converts grid and samples to another scalar type.
    pub fn cast<U: Real>(&self) -> ComplexSignal<U> {
        let grid = self.grid().cast();
        let values = self.values().iter().map(|v| Complex::new(U::lit(v.re.to_f64_lossy()), U::lit(v.im.to_f64_lossy()))).collect();
        ComplexSignal::new(grid, values, self.axis()).expect("length preserved")
    }

    pub fn with_values(&self, values: Vec<Complex<T>>) -> Result<Self> {
        Self::new(self.grid, values, self.axis)
    }

    pub fn map(&self, f: impl Fn(T, Complex<T>) -> Complex<T>) -> Self {
        let values = self.values.iter().enumerate().map(|(k, &v)| f(self.grid.point(k), v)).collect();
        Self { grid: self.grid, values, axis: self.axis }
    }

    pub fn scale(&self, c: Complex<T>) -> Self {
        self.map(|_, v| v * c)
    }

    fn check_same_grid(&self, other: &Self) -> Result<()> {
        let (a, b) = (self.grid, other.grid);
        let tol = T::lit(1e-9) * a.step();
        if a.count() != b.count() || (a.step() - b.step()).abs() > tol || (a.start() - b.start()).abs() > tol {
            return Err(LabError::GridMismatch(format!(
                "grids differ: ({}, {}, {}) vs ({}, {}, {})",
                a.start(),
                a.step(),
                a.count(),
                b.start(),
                b.step(),
                b.count()
            )));
        }
        Ok(())
    }

    pub fn zip_with(&self, other: &Self, f: impl Fn(Complex<T>, Complex<T>) -> Complex<T>) -> Result<Self> {
        self.check_same_grid(other)?;
        let values = self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect();
        Ok(Self { grid: self.grid, values, axis: self.axis })
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn mul(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a * b)
    }

    /// `(sum |f_k|^2 step)^(1/2)`.
    pub fn l2_norm(&self) -> T {
        let s = self.values.iter().fold(T::zero(), |acc, v| acc + v.norm_sqr());
        (s * self.grid.step()).sqrt()
    }

    pub fn sup_norm(&self) -> T {
        self.values.iter().fold(T::zero(), |acc, v| acc.max(v.norm()))
    }

    /// Rectangle-rule `L^p` norm; `p = inf` gives the grid maximum.
    pub fn lp_norm(&self, p: T) -> T {
        if p.is_infinite() {
            return self.sup_norm();
        }
        let s = self.values.iter().fold(T::zero(), |acc, v| acc + v.norm().powf(p));
        (s * self.grid.step()).powf(T::one() / p)
    }

    /// Relative L2 distance `||a - b|| / ||b||`.
    pub fn relative_distance(&self, reference: &Self) -> Result<T> {
        let d = self.sub(reference)?.l2_norm();
        let r = reference.l2_norm();
        Ok(if r > T::zero() { d / r } else { d })
    }

    /// Largest imaginary part relative to the peak modulus.
    pub fn imaginary_defect(&self) -> T {
        let peak = self.sup_norm();
        let im = self.values.iter().fold(T::zero(), |acc, v| acc.max(v.im.abs()));
        if peak > T::zero() {
            im / peak
        } else {
            im
        }
    }

    /// Linear interpolation; zero outside the sampled window.
    pub fn interpolate(&self, x: T) -> Complex<T> {
        let r = (x - self.grid.start()) / self.grid.step();
        if r < T::zero() || r > T::from_usize_lossy(self.len() - 1) {
            return Complex::new(T::zero(), T::zero());
        }
        let k = r.floor().to_usize().unwrap_or(0).min(self.len() - 2);
        let w = r - T::from_usize_lossy(k);
        self.values[k] * (T::one() - w) + self.values[k + 1] * w
    }

    /// Max modulus of the first/last sample relative to the peak.
    pub fn edge_ratio(&self) -> T {
        let peak = self.sup_norm();
        if peak == T::zero() {
            return T::zero();
        }
        let edge = self.values[0].norm().max(self.values[self.len() - 1].norm());
        edge / peak
    }

    /// Writes `# start=.. step=.. count=.. axis=..` followed by
    /// `index,coordinate,re,im` rows.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(
            w,
            "# start={} step={} count={} axis={}",
            self.grid.start(),
            self.grid.step(),
            self.grid.count(),
            self.axis
        )?;
        writeln!(w, "index,coordinate,re,im")?;
        for (k, v) in self.values.iter().enumerate() {
            writeln!(w, "{},{},{},{}", k, self.grid.point(k), v.re, v.im)?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r.lines();
        let header = lines
            .next()
            .ok_or_else(|| LabError::Parse("empty input".into()))?
            .map_err(|e| LabError::Parse(e.to_string()))?;
        let meta = header
            .strip_prefix('#')
            .ok_or_else(|| LabError::Parse("missing grid header".into()))?;
        let (mut start, mut step, mut count, mut axis) = (None, None, None, None);
        for field in meta.split_whitespace() {
            let (k, v) = field.split_once('=').ok_or_else(|| LabError::Parse(format!("bad field '{field}'")))?;
            let num = || v.parse::<f64>().map_err(|e| LabError::Parse(format!("{k}: {e}")));
            match k {
                "start" => start = Some(num()?),
                "step" => step = Some(num()?),
                "count" => count = Some(v.parse::<usize>().map_err(|e| LabError::Parse(e.to_string()))?),
                "axis" => axis = Some(v.parse::<Axis>()?),
                other => return Err(LabError::Parse(format!("unknown header key '{other}'"))),
            }
        }
        let missing = |n: &str| LabError::Parse(format!("header missing '{n}'"));
        let grid = UniformGrid::new(
            T::lit(start.ok_or_else(|| missing("start"))?),
            T::lit(step.ok_or_else(|| missing("step"))?),
            count.ok_or_else(|| missing("count"))?,
        )?;
        let axis = axis.ok_or_else(|| missing("axis"))?;
        let mut values = Vec::with_capacity(grid.count());
        for line in lines {
            let line = line.map_err(|e| LabError::Parse(e.to_string()))?;
            let line = line.trim();
            if line.is_empty() || line.starts_with("index") {
                continue;
            }
            let cols: Vec<&str> = line.split(',').collect();
            if cols.len() != 4 {
                return Err(LabError::Parse(format!("expected 4 columns, got {}", cols.len())));
            }
            let parse = |s: &str| s.trim().parse::<f64>().map_err(|e| LabError::Parse(e.to_string()));
            values.push(Complex::new(T::lit(parse(cols[2])?), T::lit(parse(cols[3])?)));
        }
        Self::new(grid, values, axis)
    }
}

/// Samples of `F f` on the centered frequency grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralSignal<T> {
    frequency_grid: UniformGrid<T>,
    source_grid: UniformGrid<T>,
    values: Vec<Complex<T>>,
    source_axis: Axis,
}

impl<T: Real> SpectralSignal<T> {
    /// Tag of the Fourier convention shared by the whole crate.
    pub const CONVENTION: &'static str = "forward exp(-i xi x); inverse 1/(2 pi)";

    pub fn frequency_grid(&self) -> &UniformGrid<T> {
        &self.frequency_grid
    }

    pub fn source_grid(&self) -> &UniformGrid<T> {
        &self.source_grid
    }

    pub fn values(&self) -> &[Complex<T>] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Complex<T>] {
        &mut self.values
    }

    pub fn frequency(&self, k: usize) -> T {
        self.frequency_grid.point(k)
    }

    /// `sum |F_k|^2 dxi / (2 pi)`, the L2 norm squared by Parseval.
    pub fn energy(&self) -> T {
        let s = self.values.iter().fold(T::zero(), |acc, v| acc + v.norm_sqr());
        s * self.frequency_grid.step() / T::TAU()
    }
}

fn require_pow2<T: Real>(grid: &UniformGrid<T>) -> Result<()> {
    if grid.is_power_of_two() {
        Ok(())
    } else {
        Err(LabError::NotPowerOfTwo(grid.count()))
    }
}

pub(crate) fn fft_forward<T: Real>(buf: &mut [Complex<T>]) {
    let mut planner = FftPlanner::<T>::new();
    planner.plan_fft_forward(buf.len()).process(buf);
}

/// Unnormalized inverse FFT.
pub(crate) fn fft_inverse<T: Real>(buf: &mut [Complex<T>]) {
    let mut planner = FftPlanner::<T>::new();
    planner.plan_fft_inverse(buf.len()).process(buf);
}

/// Discrete approximation of `F f(xi) = \int e^{-i xi x} f(x) dx`.
pub fn dft<T: Real>(signal: &ComplexSignal<T>) -> Result<SpectralSignal<T>> {
    let grid = *signal.grid();
    require_pow2(&grid)?;
    let n = grid.count();
    let mut buf = signal.values().to_vec();
    fft_forward(&mut buf);
    let fgrid = grid.frequency_grid();
    let h = grid.step();
    let a = grid.start();
    let half = n / 2;
    let values = (0..n)
        .map(|k| {
            let xi = fgrid.point(k);
            let natural = (k + n - half) % n;
            buf[natural] * cis(-xi * a) * h
        })
        .collect();
    Ok(SpectralSignal { frequency_grid: fgrid, source_grid: grid, values, source_axis: signal.axis() })
}

/// Exact inverse of [`dft`].
pub fn idft<T: Real>(spec: &SpectralSignal<T>) -> Result<ComplexSignal<T>> {
    let grid = spec.source_grid;
    require_pow2(&grid)?;
    let n = grid.count();
    let half = n / 2;
    let a = grid.start();
    let mut buf = vec![Complex::new(T::zero(), T::zero()); n];
    for (k, &v) in spec.values.iter().enumerate() {
        let xi = spec.frequency_grid.point(k);
        buf[(k + n - half) % n] = v * cis(xi * a);
    }
    fft_inverse(&mut buf);
    let scale = T::one() / (T::from_usize_lossy(n) * grid.step());
    for v in &mut buf {
        *v = *v * scale;
    }
    ComplexSignal::new(grid, buf, spec.source_axis)
}

/// Applies the Fourier multiplier `m(xi)` to `signal`.
pub fn apply_multiplier<T: Real>(
    signal: &ComplexSignal<T>,
    m: impl Fn(T) -> Complex<T>,
) -> Result<ComplexSignal<T>> {
    let grid = *signal.grid();
    require_pow2(&grid)?;
    let mut buf = signal.values().to_vec();
    fft_forward(&mut buf);
    for (v, xi) in buf.iter_mut().zip(grid.natural_frequencies()) {
        *v = *v * m(xi);
    }
    fft_inverse(&mut buf);
    let inv_n = T::one() / T::from_usize_lossy(grid.count());
    for v in &mut buf {
        *v = *v * inv_n;
    }
    ComplexSignal::new(grid, buf, signal.axis())
}

/// Validity checks applied before a spectral norm is trusted.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormOptions {
    /// Edge-to-peak modulus ratio above which the signal is not compactly supported.
    pub support_floor: f64,
    /// Escalate a support violation from a warning to an error.
    pub strict: bool,
}

impl Default for NormOptions {
    fn default() -> Self {
        Self { support_floor: 1e-8, strict: false }
    }
}

impl NormOptions {
    pub fn strict() -> Self {
        Self { strict: true, ..Self::default() }
    }

    pub fn lenient() -> Self {
        Self { support_floor: f64::INFINITY, strict: false }
    }
}

pub(crate) fn check_support<T: Real>(signal: &ComplexSignal<T>, opts: NormOptions) -> Result<()> {
    let ratio = signal.edge_ratio().to_f64_lossy();
    if ratio > opts.support_floor {
        if opts.strict {
            return Err(LabError::SupportViolation { ratio, floor: opts.support_floor });
        }
        log::warn!("signal edge/peak ratio {ratio:.3e} exceeds support floor {:.1e}", opts.support_floor);
    }
    Ok(())
}

/// `((1/2pi) \int (1 + tau^2)^s |F f(tau)|^2 dtau)^(1/2)` over the discrete band.
pub fn sobolev_norm<T: Real>(signal: &ComplexSignal<T>, s: T, opts: NormOptions) -> Result<T> {
    check_support(signal, opts)?;
    let grid = *signal.grid();
    require_pow2(&grid)?;
    let mut buf = signal.values().to_vec();
    fft_forward(&mut buf);
    Ok(weighted_energy(&buf, &grid, |xi| (T::one() + xi * xi).powf(s)).sqrt())
}

/// `h/N sum_k w(xi_k) |FFT_k|^2` for a natural-order spectrum.
pub(crate) fn weighted_energy<T: Real>(spectrum: &[Complex<T>], grid: &UniformGrid<T>, w: impl Fn(T) -> T) -> T {
    let acc = spectrum
        .iter()
        .zip(grid.natural_frequencies())
        .fold(T::zero(), |acc, (v, xi)| acc + w(xi) * v.norm_sqr());
    acc * grid.step() / T::from_usize_lossy(grid.count())
}
