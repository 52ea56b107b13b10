//! Coupling paths `alpha(t)` and their compactly supported truncation
//! `alpha_T(s) = alpha(s) chi(s/T)`.

use std::fmt;
use std::sync::Arc;

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::scalar::Real;
use crate::signal::{Axis, ComplexSignal, UniformGrid};

/// Inner radius of the plateau `chi = 1`.
pub const PLATEAU: f64 = 0.3;
/// `chi` vanishes for `|x| >= SUPPORT`.
pub const SUPPORT: f64 = 0.5;

/// `C^infinity` step: 0 for `x <= 0`, 1 for `x >= 1`.
pub fn smooth_step<T: Real>(x: T) -> T {
    let f = |y: T| if y > T::zero() { (-y.recip()).exp() } else { T::zero() };
    if x <= T::zero() {
        return T::zero();
    }
    if x >= T::one() {
        return T::one();
    }
    let a = f(x);
    a / (a + f(T::one() - x))
}

/// Truncation profile: 1 on `|x| <= 0.3`, 0 on `|x| >= 0.5`, smooth between.
pub fn chi<T: Real>(x: T) -> T {
    let (p, s) = (T::lit(PLATEAU), T::lit(SUPPORT));
    T::one() - smooth_step((x.abs() - p) / (s - p))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CouplingKind {
    ClosedForm,
    Sampled,
    Synthesized,
}

type PathFn<T> = Arc<dyn Fn(T) -> T + Send + Sync>;

/// A real coupling `alpha(t)` with its truncation horizon `T`.
#[derive(Clone)]
pub struct CouplingPath<T: Real> {
    kind: CouplingKind,
    samples: ComplexSignal<T>,
    closed_form: Option<PathFn<T>>,
    regularity_class: T,
    horizon: T,
}

impl<T: Real> fmt::Debug for CouplingPath<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CouplingPath")
            .field("kind", &self.kind)
            .field("grid", self.samples.grid())
            .field("regularity_class", &self.regularity_class)
            .field("horizon", &self.horizon)
            .finish()
    }
}

fn check_horizon<T: Real>(horizon: T) -> Result<()> {
    if horizon > T::zero() && horizon.is_finite() {
        Ok(())
    } else {
        Err(LabError::Domain(format!("truncation horizon must be positive, got {horizon}")))
    }
}

impl<T: Real> CouplingPath<T> {
    /// Closed-form path; `grid` only fixes where samples are recorded.
    pub fn closed_form(
        f: impl Fn(T) -> T + Send + Sync + 'static,
        grid: UniformGrid<T>,
        horizon: T,
        regularity_class: T,
    ) -> Result<Self> {
        check_horizon(horizon)?;
        let samples = ComplexSignal::from_real_fn(grid, Axis::Time, &f);
        Ok(Self {
            kind: CouplingKind::ClosedForm,
            samples,
            closed_form: Some(Arc::new(f)),
            regularity_class,
            horizon,
        })
    }

    pub fn constant(value: T, grid: UniformGrid<T>, horizon: T) -> Result<Self> {
        Self::closed_form(move |_| value, grid, horizon, T::infinity())
    }

    pub fn zero(grid: UniformGrid<T>, horizon: T) -> Result<Self> {
        Self::constant(T::zero(), grid, horizon)
    }

    /// Sampled path, linearly interpolated between samples and zero outside them.
    pub fn sampled(samples: ComplexSignal<T>, horizon: T, regularity_class: T) -> Result<Self> {
        Self::from_samples(CouplingKind::Sampled, samples, horizon, regularity_class)
    }

    pub(crate) fn from_samples(
        kind: CouplingKind,
        samples: ComplexSignal<T>,
        horizon: T,
        regularity_class: T,
    ) -> Result<Self> {
        check_horizon(horizon)?;
        let peak = samples.sup_norm();
        let tol = T::lit(1e-12) * (T::one() + peak);
        if samples.values().iter().any(|v| v.im.abs() > tol) {
            return Err(LabError::Domain("coupling samples must be real".into()));
        }
        let values = samples.values().iter().map(|v| Complex::new(v.re, T::zero())).collect();
        let samples = ComplexSignal::new(*samples.grid(), values, Axis::Time)?;
        Ok(Self { kind, samples, closed_form: None, regularity_class, horizon })
    }

    pub fn kind(&self) -> CouplingKind {
        self.kind
    }

    pub fn samples(&self) -> &ComplexSignal<T> {
        &self.samples
    }

    pub fn regularity_class(&self) -> T {
        self.regularity_class
    }

    pub fn horizon(&self) -> T {
        self.horizon
    }

    pub fn with_horizon(&self, horizon: T) -> Result<Self> {
        check_horizon(horizon)?;
        Ok(Self { horizon, ..self.clone() })
    }

    /// Scales the path by a real factor.
    pub fn scaled(&self, c: T) -> Self {
        let samples = self.samples.scale(Complex::new(c, T::zero()));
        let closed_form = self.closed_form.clone().map(|f| Arc::new(move |t| c * f(t)) as PathFn<T>);
        Self { samples, closed_form, ..self.clone() }
    }

    /// Sum of two paths sharing a horizon (sampled on `self`'s grid).
    pub fn plus(&self, other: &Self) -> Result<Self> {
        let grid = *self.samples.grid();
        let values = grid.points().map(|t| Complex::new(self.value(t) + other.value(t), T::zero())).collect();
        let samples = ComplexSignal::new(grid, values, Axis::Time)?;
        let reg = self.regularity_class.min(other.regularity_class);
        Self::from_samples(CouplingKind::Sampled, samples, self.horizon, reg)
    }

    /// `alpha(t)`.
    pub fn value(&self, t: T) -> T {
        match &self.closed_form {
            Some(f) => f(t),
            None => self.samples.interpolate(t).re,
        }
    }

    /// `alpha_T(t) = alpha(t) chi(t/T)`.
    pub fn truncated(&self, t: T) -> T {
        let c = chi(t / self.horizon);
        if c == T::zero() {
            T::zero()
        } else {
            c * self.value(t)
        }
    }

    pub fn truncated_on(&self, grid: &UniformGrid<T>) -> Vec<T> {
        grid.points().map(|t| self.truncated(t)).collect()
    }

    pub fn truncated_signal(&self, grid: &UniformGrid<T>) -> ComplexSignal<T> {
        ComplexSignal::from_real_fn(*grid, Axis::Time, |t| self.truncated(t))
    }

    /// Half-width of the plateau on which `alpha_T = alpha`.
    pub fn plateau_radius(&self) -> T {
        T::lit(PLATEAU) * self.horizon
    }

    pub fn is_identically_zero(&self) -> bool {
        self.samples.values().iter().all(|v| v.re == T::zero())
            && self.closed_form.as_ref().is_none_or(|f| {
                let g = self.samples.grid();
                (0..64).all(|k| f(g.start() + (g.last() - g.start()) * T::lit(k as f64 / 63.0)) == T::zero())
            })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chi_profile_shape() {
        assert_eq!(chi(0.0f64), 1.0);
        assert_eq!(chi(0.3f64), 1.0);
        assert_eq!(chi(-0.29f64), 1.0);
        assert_eq!(chi(0.5f64), 0.0);
        assert_eq!(chi(-0.7f64), 0.0);
        let mid = chi(0.4f64);
        assert!((mid - 0.5).abs() < 1e-12);
        let mut prev = 1.0;
        for k in 0..=200 {
            let v = chi(0.3 + 0.2 * k as f64 / 200.0);
            assert!(v <= prev + 1e-15);
            prev = v;
        }
    }

    #[test]
    fn truncated_path_has_half_horizon_support() {
        let grid = UniformGrid::<f64>::spanning(-5.0, 5.0, 1001).unwrap();
        let a = CouplingPath::constant(-2.0, grid, 4.0).unwrap();
        for t in grid.points() {
            if t.abs() >= 2.0 {
                assert_eq!(a.truncated(t), 0.0);
            }
            if t.abs() <= 1.2 {
                assert_eq!(a.truncated(t), -2.0);
            }
        }
    }

    #[test]
    fn sampled_path_rejects_complex_values() {
        let grid = UniformGrid::<f64>::spanning(0.0, 1.0, 11).unwrap();
        let s = ComplexSignal::from_fn(grid, Axis::Time, |t| Complex::new(t, 0.1));
        assert!(CouplingPath::sampled(s, 4.0, 1.0).is_err());
    }

    #[test]
    fn sampled_path_interpolates() {
        let grid = UniformGrid::<f64>::spanning(0.0, 1.0, 11).unwrap();
        let s = ComplexSignal::from_real_fn(grid, Axis::Time, |t| 3.0 * t);
        let a = CouplingPath::sampled(s, 4.0, 1.0).unwrap();
        assert!((a.value(0.55) - 1.65).abs() < 1e-12);
        assert!(!a.is_identically_zero());
        assert!(CouplingPath::zero(grid, 4.0).unwrap().is_identically_zero());
    }
}
