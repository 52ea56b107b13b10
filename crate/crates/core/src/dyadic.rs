//! Littlewood-Paley blocks, Besov norms, Bony's paraproduct and the
//! product-law and Bernstein ratios built on them.
//!
//! `chi = 1` on `[-1, 1]` and vanishes beyond `4/3`; `phi(xi) = chi(xi/2) - chi(xi)`
//! lives in `1 <= |xi| <= 8/3`, so `chi + sum_{q<=Q} phi(2^-q .) = chi(2^{-Q-1} .)`
//! holds by telescoping.

use num_complex::Complex;

use crate::coupling::smooth_step;
use crate::error::{LabError, Result};
use crate::scalar::Real;
use crate::signal::{apply_multiplier, sobolev_norm, ComplexSignal, NormOptions, UniformGrid};

/// Outer radius of the annulus carrying `phi`.
pub const ANNULUS_OUTER: f64 = 8.0 / 3.0;
/// Smallest admissible sample count.
pub const MIN_COUNT: usize = 64;

/// `1` on `[-1, 1]`, `0` beyond `4/3`.
pub fn chi<T: Real>(xi: T) -> T {
    let third = T::one() / T::lit(3.0);
    T::one() - smooth_step((xi.abs() - T::one()) / third)
}

/// `chi(xi/2) - chi(xi)`.
pub fn phi<T: Real>(xi: T) -> T {
    chi(xi / T::lit(2.0)) - chi(xi)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DyadicPartition<T> {
    grid: UniformGrid<T>,
    q_max: i32,
}

pub fn build_partition<T: Real>(grid: &UniformGrid<T>) -> Result<DyadicPartition<T>> {
    let nyq = grid.nyquist().to_f64_lossy();
    let q_max = (nyq / ANNULUS_OUTER).log2().floor() as i32 - 1;
    let need = |count: usize| count >= MIN_COUNT && q_max >= 2;
    if !need(grid.count()) {
        // three annuli need nyquist >= 8/3 * 2^3
        let step_needed = std::f64::consts::PI / (ANNULUS_OUTER * 8.0);
        let len = grid.length().to_f64_lossy();
        let min_count = ((len / step_needed).ceil() as usize).max(MIN_COUNT).next_power_of_two();
        return Err(LabError::Resolution { min_count, count: grid.count() });
    }
    Ok(DyadicPartition { grid: *grid, q_max })
}

impl<T: Real> DyadicPartition<T> {
    pub fn q_max(&self) -> i32 {
        self.q_max
    }

    pub fn grid(&self) -> &UniformGrid<T> {
        &self.grid
    }

    /// Frequencies `|xi| <= 2^{q_max + 1}` are fully covered by the blocks.
    pub fn resolved_band(&self) -> T {
        T::lit(2f64.powi(self.q_max + 1))
    }

    /// Multiplier of `Delta_q` (`q = -1` is `chi(D)`).
    pub fn block_symbol(&self, q: i32, xi: T) -> T {
        if q < 0 {
            chi(xi)
        } else {
            phi(xi / T::lit(2f64.powi(q)))
        }
    }

    /// Multiplier of `S_q = sum_{j <= q - 1} Delta_j`, i.e. `chi(2^{-q} xi)`.
    pub fn low_symbol(&self, q: i32, xi: T) -> T {
        if q < 0 {
            T::zero()
        } else {
            chi(xi / T::lit(2f64.powi(q)))
        }
    }

    /// `max |chi + sum_q phi_q - 1|` over grid frequencies inside the resolved band.
    pub fn unity_residual(&self) -> T {
        let band = self.resolved_band() / T::lit(2.0);
        self.grid
            .natural_frequencies()
            .into_iter()
            .filter(|xi| xi.abs() <= band)
            .map(|xi| {
                let s = (0..=self.q_max).fold(chi(xi), |acc, q| acc + self.block_symbol(q, xi));
                (s - T::one()).abs()
            })
            .fold(T::zero(), |a, b| a.max(b))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DyadicDecomposition<T: Real> {
    pub partition: DyadicPartition<T>,
    /// `blocks[0]` is `Delta_{-1}`, `blocks[q + 1]` is `Delta_q`.
    pub blocks: Vec<ComplexSignal<T>>,
    pub source_grid: UniformGrid<T>,
}

impl<T: Real> DyadicDecomposition<T> {
    pub fn block(&self, q: i32) -> &ComplexSignal<T> {
        &self.blocks[(q + 1) as usize]
    }

    /// `S_q f = sum_{j <= q - 1} Delta_j f`.
    pub fn partial_sum(&self, q: i32) -> ComplexSignal<T> {
        let mut acc = ComplexSignal::zeros(self.source_grid, self.blocks[0].axis());
        for j in -1..q.min(self.partition.q_max + 1) {
            acc = acc.add(self.block(j)).expect("blocks share a grid");
        }
        acc
    }

    pub fn reconstruct(&self) -> ComplexSignal<T> {
        self.partial_sum(self.partition.q_max + 1)
    }

    /// `x` column followed by `re, im` columns per block.
    pub fn write_csv<W: std::io::Write>(&self, mut w: W) -> std::io::Result<()> {
        let header: Vec<String> =
            (-1..=self.partition.q_max).flat_map(|q| [format!("re_{q}"), format!("im_{q}")]).collect();
        writeln!(w, "x,{}", header.join(","))?;
        for k in 0..self.source_grid.count() {
            let cols: Vec<String> = self
                .blocks
                .iter()
                .flat_map(|b| [b.values()[k].re.to_string(), b.values()[k].im.to_string()])
                .collect();
            writeln!(w, "{},{}", self.source_grid.point(k), cols.join(","))?;
        }
        Ok(())
    }
}

fn same_grid<T: Real>(a: &UniformGrid<T>, b: &UniformGrid<T>) -> Result<()> {
    if a.count() != b.count() || a.step() != b.step() || a.start() != b.start() {
        return Err(LabError::GridMismatch("signal and partition grids differ".into()));
    }
    Ok(())
}

pub fn decompose<T: Real>(f: &ComplexSignal<T>, partition: &DyadicPartition<T>) -> Result<DyadicDecomposition<T>> {
    same_grid(f.grid(), partition.grid())?;
    let blocks = (-1..=partition.q_max)
        .map(|q| apply_multiplier(f, |xi| Complex::new(partition.block_symbol(q, xi), T::zero())))
        .collect::<Result<Vec<_>>>()?;
    Ok(DyadicDecomposition { partition: *partition, blocks, source_grid: *f.grid() })
}

/// Index `(s, p, r)` with `p, r` in `[1, inf]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BesovIndex<T> {
    pub s: T,
    pub p: T,
    pub r: T,
}

impl<T: Real> BesovIndex<T> {
    pub fn new(s: T, p: T, r: T) -> Result<Self> {
        if !(p >= T::one()) || !(r >= T::one()) || !s.is_finite() {
            return Err(LabError::Domain(format!("Besov index needs p, r in [1, inf], got p = {p}, r = {r}")));
        }
        Ok(Self { s, p, r })
    }

    /// `B^s_{2,2}`.
    pub fn sobolev(s: T) -> Self {
        Self { s, p: T::lit(2.0), r: T::lit(2.0) }
    }
}

/// `L^p` norm by rectangle quadrature; `p = inf` is the grid maximum.
pub fn lp_norm<T: Real>(f: &ComplexSignal<T>, p: T) -> T {
    if p.is_infinite() {
        f.sup_norm()
    } else {
        f.lp_norm(p)
    }
}

fn aggregate<T: Real>(terms: impl Iterator<Item = T>, r: T) -> T {
    if r.is_infinite() {
        terms.fold(T::zero(), |a, b| a.max(b))
    } else {
        terms.fold(T::zero(), |a, b| a + b.powf(r)).powf(r.recip())
    }
}

pub fn besov_norm_of<T: Real>(d: &DyadicDecomposition<T>, idx: BesovIndex<T>) -> T {
    let two = T::lit(2.0);
    let terms = (-1..=d.partition.q_max).map(|q| two.powf(T::lit(q as f64) * idx.s) * lp_norm(d.block(q), idx.p));
    aggregate(terms, idx.r)
}

pub fn besov_norm<T: Real>(f: &ComplexSignal<T>, idx: BesovIndex<T>, partition: &DyadicPartition<T>) -> Result<T> {
    Ok(besov_norm_of(&decompose(f, partition)?, idx))
}

/// The three pieces of Bony's decomposition of `uv`.
#[derive(Debug, Clone, PartialEq)]
pub struct BonyParts<T: Real> {
    pub tuv: ComplexSignal<T>,
    pub tvu: ComplexSignal<T>,
    pub remainder: ComplexSignal<T>,
}

impl<T: Real> BonyParts<T> {
    pub fn sum(&self) -> ComplexSignal<T> {
        self.tuv.add(&self.tvu).and_then(|s| s.add(&self.remainder)).expect("parts share a grid")
    }
}

/// `T_u v = sum_q S_{q-1} u Delta_q v`, `T_v u` and `R = sum_{|q - q'| <= 1} Delta_q u Delta_q' v`.
pub fn bony_decompose<T: Real>(
    u: &ComplexSignal<T>,
    v: &ComplexSignal<T>,
    partition: &DyadicPartition<T>,
) -> Result<BonyParts<T>> {
    same_grid(u.grid(), v.grid())?;
    let du = decompose(u, partition)?;
    let dv = decompose(v, partition)?;
    let grid = *u.grid();
    let axis = u.axis();
    let mut tuv = ComplexSignal::zeros(grid, axis);
    let mut tvu = ComplexSignal::zeros(grid, axis);
    let mut rem = ComplexSignal::zeros(grid, axis);
    for q in -1..=partition.q_max {
        let su = du.partial_sum(q - 1);
        let sv = dv.partial_sum(q - 1);
        tuv = tuv.add(&su.mul(dv.block(q))?)?;
        tvu = tvu.add(&sv.mul(du.block(q))?)?;
        for qq in (q - 1).max(-1)..=(q + 1).min(partition.q_max) {
            rem = rem.add(&du.block(q).mul(dv.block(qq))?)?;
        }
    }
    Ok(BonyParts { tuv, tvu, remainder: rem })
}

/// Product laws in one dimension.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ProductLaw {
    /// `H^s x (B^{1/2}_{2,inf} cap L^inf) -> H^s`, `|s| < 1/2`.
    A { s: f64 },
    /// `H^s x B^{s+eps}_{inf,inf} -> H^s`, `s >= 0`, `eps > 0`.
    B { s: f64, eps: f64 },
    /// `H^s x H^{s'} -> H^{s+s'-1/2}`, `s, s' < 1/2`, `s + s' > 0`.
    C { s: f64, s2: f64 },
    /// `H^s` algebra for `s > 1/2`; `H^s cap L^inf` algebra for `s >= 0`.
    D { s: f64 },
}

impl ProductLaw {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            ProductLaw::A { s } => s.abs() < 0.5,
            ProductLaw::B { s, eps } => s >= 0.0 && eps > 0.0,
            ProductLaw::C { s, s2 } => s < 0.5 && s2 < 0.5 && s + s2 > 0.0,
            ProductLaw::D { s } => s >= 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(LabError::Domain(format!("indices outside the validity range of {self:?}")))
        }
    }
}

/// `||uv||_target / (||u||_X ||v||_Y)` for the chosen law.
pub fn product_law_ratio<T: Real>(
    u: &ComplexSignal<T>,
    v: &ComplexSignal<T>,
    law: ProductLaw,
    partition: &DyadicPartition<T>,
) -> Result<T> {
    law.validate()?;
    let opts = NormOptions::lenient();
    let h = |f: &ComplexSignal<T>, s: f64| sobolev_norm(f, T::lit(s), opts);
    let uv = u.mul(v)?;
    let (num, den) = match law {
        ProductLaw::A { s } => {
            let bv = besov_norm(v, BesovIndex { s: T::lit(0.5), p: T::lit(2.0), r: T::infinity() }, partition)?;
            (h(&uv, s)?, h(u, s)? * (bv + v.sup_norm()))
        }
        ProductLaw::B { s, eps } => {
            let bv = besov_norm(v, BesovIndex { s: T::lit(s + eps), p: T::infinity(), r: T::infinity() }, partition)?;
            (h(&uv, s)?, h(u, s)? * bv)
        }
        ProductLaw::C { s, s2 } => (h(&uv, s + s2 - 0.5)?, h(u, s)? * h(v, s2)?),
        ProductLaw::D { s } if s > 0.5 => (h(&uv, s)?, h(u, s)? * h(v, s)?),
        ProductLaw::D { s } => {
            let n = |f: &ComplexSignal<T>| -> Result<T> { Ok(h(f, s)? + f.sup_norm()) };
            (n(&uv)?, n(u)? * n(v)?)
        }
    };
    Ok(if den > T::zero() { num / den } else { T::zero() })
}

/// Which Bernstein inequality to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BernsteinLine {
    /// `||d^k S_q f||_{L^b}` against `2^{q(k + 1/a - 1/b)} ||S_q f||_{L^a}`.
    LowPass,
    /// `||d^k Delta_q f||_{L^a}` against `2^{qk} ||Delta_q f||_{L^a}` (two-sided).
    Block,
}

/// Both sides of the Bernstein inequality, without the constant `C^k`.
pub fn bernstein_check<T: Real>(
    f: &ComplexSignal<T>,
    partition: &DyadicPartition<T>,
    line: BernsteinLine,
    q: i32,
    k: u32,
    a: T,
    b: T,
) -> Result<(T, T)> {
    if a < T::one() || a > b {
        return Err(LabError::Domain(format!("Bernstein exponents need 1 <= a <= b, got a = {a}, b = {b}")));
    }
    if q < 0 || q > partition.q_max {
        return Err(LabError::Domain(format!("block index {q} outside 0..={}", partition.q_max)));
    }
    same_grid(f.grid(), partition.grid())?;
    let symbol = |xi: T| -> T {
        match line {
            BernsteinLine::LowPass => partition.low_symbol(q, xi),
            BernsteinLine::Block => partition.block_symbol(q, xi),
        }
    };
    let piece = apply_multiplier(f, |xi| Complex::new(symbol(xi), T::zero()))?;
    let deriv = apply_multiplier(f, |xi| Complex::new(T::zero(), xi).powu(k) * symbol(xi))?;
    let two_q = T::lit(2f64.powi(q));
    match line {
        BernsteinLine::LowPass => {
            let expo = T::lit(k as f64) + a.recip() - if b.is_infinite() { T::zero() } else { b.recip() };
            Ok((lp_norm(&deriv, b), two_q.powf(expo) * lp_norm(&piece, a)))
        }
        BernsteinLine::Block => Ok((lp_norm(&deriv, a), two_q.powi(k as i32) * lp_norm(&piece, a))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::Axis;

    #[test]
    fn profiles_have_the_stated_supports() {
        assert_eq!(chi(1.0f64), 1.0);
        assert_eq!(chi(4.0f64 / 3.0), 0.0);
        assert_eq!(phi(0.99f64), 0.0);
        assert_eq!(phi(2.7f64), 0.0);
        assert!((phi(2.0f64) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn coarse_grid_is_rejected() {
        let g = UniformGrid::<f64>::centered(20.0, 32).unwrap();
        assert!(matches!(build_partition(&g), Err(LabError::Resolution { .. })));
    }

    #[test]
    fn tone_lands_in_neighbouring_blocks() {
        let g = UniformGrid::<f64>::centered(64.0, 2048).unwrap();
        let p = build_partition(&g).unwrap();
        let q = 3;
        let dxi = g.frequency_step();
        let xi0 = (12.0 / dxi).round() * dxi;
        let f = ComplexSignal::from_fn(g, Axis::Space, |x| Complex::from_polar(1.0, xi0 * x));
        let d = decompose(&f, &p).unwrap();
        for j in -1..=p.q_max() {
            let e = d.block(j).l2_norm();
            if (j - q).abs() > 1 {
                assert!(e < 1e-10 * f.l2_norm(), "block {j} carries {e}");
            }
        }
    }
}
