//! Quadrature kernels: Gauss-Legendre rules, the unit Fresnel integral,
//! exact panel moments for the Abel and point-source kernels, and Filon
//! weights for linear interpolants against `e^{i phi theta}`.
//!
//! Special functions evaluate in `f64`; callers convert to their scalar.

use std::f64::consts::{FRAC_PI_4, PI};
use std::sync::OnceLock;

use num_complex::Complex64;

/// Nodes and weights of the `n`-point Gauss-Legendre rule on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "rule needs at least one node");
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (p, d) = legendre(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

fn legendre(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Gauss-Legendre rule mapped to `[a, b]`.
#[derive(Debug, Clone)]
pub struct GaussRule {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussRule {
    pub fn new(n: usize) -> Self {
        let (nodes, weights) = gauss_legendre(n);
        Self { nodes, weights }
    }

    /// Nodes on `[-1, 1]`.
    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn integrate<F: FnMut(f64) -> Complex64>(&self, a: f64, b: f64, mut f: F) -> Complex64 {
        let c = 0.5 * (a + b);
        let r = 0.5 * (b - a);
        let mut acc = Complex64::new(0.0, 0.0);
        for (x, w) in self.nodes.iter().zip(&self.weights) {
            acc += f(c + r * x) * *w;
        }
        acc * r
    }

    pub fn integrate_real<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, mut f: F) -> f64 {
        let c = 0.5 * (a + b);
        let r = 0.5 * (b - a);
        self.nodes.iter().zip(&self.weights).map(|(x, w)| f(c + r * x) * w).sum::<f64>() * r
    }
}

// ---------------------------------------------------------------------------
// Fresnel integral E(z) = \int_0^z e^{i v^2} dv

const FRESNEL_SPLIT: f64 = 6.0;
const FRESNEL_STEP: f64 = 0.01;

/// `\int_0^\infty e^{i v^2} dv = (sqrt(pi)/2) e^{i pi/4}`.
pub fn fresnel_limit() -> Complex64 {
    Complex64::from_polar(0.5 * PI.sqrt(), FRAC_PI_4)
}

struct FresnelTable {
    values: Vec<Complex64>,
    rule: GaussRule,
}

fn fresnel_table() -> &'static FresnelTable {
    static TABLE: OnceLock<FresnelTable> = OnceLock::new();
    TABLE.get_or_init(|| {
        let n = (FRESNEL_SPLIT / FRESNEL_STEP).round() as usize;
        let panel = GaussRule::new(10);
        let mut values = Vec::with_capacity(n + 2);
        let mut acc = Complex64::new(0.0, 0.0);
        values.push(acc);
        for k in 0..=n {
            let a = k as f64 * FRESNEL_STEP;
            acc += panel.integrate(a, a + FRESNEL_STEP, |v| Complex64::cis(v * v));
            values.push(acc);
        }
        FresnelTable { values, rule: GaussRule::new(5) }
    })
}

/// `sum_{n>=1} c_n / (2 i z^2)^n` with `c_n = prod_{k<=n} (2k - 1 + shift)`,
/// truncated at the smallest term of the asymptotic series.
fn asymptotic_series(z: f64, shift: f64) -> Complex64 {
    let w = Complex64::new(0.0, 2.0 * z * z).inv();
    let mut term = Complex64::new(1.0, 0.0);
    let mut sum = Complex64::new(0.0, 0.0);
    let mut last = f64::INFINITY;
    for n in 1..200 {
        term *= w * (2.0 * n as f64 - 1.0 + shift);
        let m = term.norm();
        if m > last {
            break;
        }
        sum += term;
        last = m;
        if m < 1e-17 {
            break;
        }
    }
    sum
}

/// `r(z) = sum_{n>=1} (2n-1)!! / (2 i z^2)^n`.
fn fresnel_r(z: f64) -> Complex64 {
    asymptotic_series(z, 0.0)
}

/// `-sum_{m>=1} (2m+1)!! / (2 i z^2)^m`.
fn fresnel_r1(z: f64) -> Complex64 {
    -asymptotic_series(z, 2.0)
}

/// `E(z) = \int_0^z e^{i v^2} dv` for real `z`.
pub fn fresnel_unit(z: f64) -> Complex64 {
    if z < 0.0 {
        return -fresnel_unit(-z);
    }
    if z > FRESNEL_SPLIT {
        let tail = Complex64::cis(z * z) / Complex64::new(0.0, 2.0 * z) * (1.0 + fresnel_r(z));
        return fresnel_limit() + tail;
    }
    let t = fresnel_table();
    let k = (z / FRESNEL_STEP).round() as usize;
    let zk = k as f64 * FRESNEL_STEP;
    if (z - zk).abs() < 1e-300 {
        return t.values[k];
    }
    t.values[k] + t.rule.integrate(zk, z, |v| Complex64::cis(v * v))
}

// ---------------------------------------------------------------------------
// Point-source kernel panel moments

/// Antiderivatives of `tau^{-1/2} e^{i beta/tau}` and `tau^{1/2} e^{i beta/tau}`.
///
/// In the oscillatory regime the constants `-4 i sqrt(beta) E_inf` (and its
/// companion) are split off so that differences between neighbouring nodes do
/// not cancel catastrophically.
#[derive(Debug, Clone, Copy)]
pub struct KernelAntiderivative {
    pub f0: Complex64,
    pub f1: Complex64,
    /// `true` when the split-off constants are excluded from `f0`, `f1`.
    pub asymptotic: bool,
}

/// Evaluates the antiderivatives at `tau >= 0` for `beta = x^2/4 >= 0`.
pub fn kernel_antiderivative(beta: f64, tau: f64) -> KernelAntiderivative {
    debug_assert!(beta >= 0.0 && tau >= 0.0);
    if beta == 0.0 {
        let s = tau.sqrt();
        return KernelAntiderivative {
            f0: Complex64::new(2.0 * s, 0.0),
            f1: Complex64::new(2.0 / 3.0 * tau * s, 0.0),
            asymptotic: false,
        };
    }
    if tau == 0.0 {
        return KernelAntiderivative { f0: Complex64::new(0.0, 0.0), f1: Complex64::new(0.0, 0.0), asymptotic: true };
    }
    let z = (beta / tau).sqrt();
    let st = tau.sqrt();
    let e = Complex64::cis(beta / tau);
    if z > FRESNEL_SPLIT {
        KernelAntiderivative {
            f0: -2.0 * st * e * fresnel_r(z),
            f1: (2.0 / 3.0) * tau * st * e * fresnel_r1(z),
            asymptotic: true,
        }
    } else {
        let f0 = 2.0 * st * e - Complex64::new(0.0, 4.0 * beta.sqrt()) * fresnel_unit(z);
        let f1 = (2.0 / 3.0) * tau * st * e + Complex64::new(0.0, 2.0 * beta / 3.0) * f0;
        KernelAntiderivative { f0, f1, asymptotic: false }
    }
}

/// The constants excluded from asymptotic antiderivatives.
pub fn kernel_constants(beta: f64) -> (Complex64, Complex64) {
    let c0 = Complex64::new(0.0, -4.0 * beta.sqrt()) * fresnel_limit();
    let c1 = Complex64::new(0.0, 2.0 * beta / 3.0) * c0;
    (c0, c1)
}

/// `(M0, M1)` = `\int_a^b tau^{-1/2 + m} e^{i beta/tau} dtau` for `m = 0, 1`.
pub fn kernel_moments(
    lo: &KernelAntiderivative,
    hi: &KernelAntiderivative,
    constants: (Complex64, Complex64),
) -> (Complex64, Complex64) {
    let (mut d0, mut d1) = (hi.f0 - lo.f0, hi.f1 - lo.f1);
    if hi.asymptotic != lo.asymptotic {
        let sign = if hi.asymptotic { 1.0 } else { -1.0 };
        d0 += sign * constants.0;
        d1 += sign * constants.1;
    }
    (d0, d1)
}

// ---------------------------------------------------------------------------
// Abel product-integration weights

/// Weights of `\int_m^{m+1} u^{-1/2} p(u) du` for the linear `p` with
/// `p(m+1) = 0, p(m) = 1` (`near`) and `p(m) = 0, p(m+1) = 1` (`far`).
pub fn abel_panel_weights(m: usize) -> (f64, f64) {
    let a = (m as f64).sqrt();
    let b = ((m + 1) as f64).sqrt();
    let d = (a + b) * (a + b);
    ((2.0 / 3.0) * (2.0 * b + a) / d, (2.0 / 3.0) * (b + 2.0 * a) / d)
}

/// Toeplitz weights for `\int_0^{t_n} (t_n - s)^{-1/2} q(s) ds` on a uniform grid
/// (unit step): `coefficient(n, p)` multiplies `q_p`.
#[derive(Debug, Clone)]
pub struct AbelWeights {
    near: Vec<f64>,
    far: Vec<f64>,
}

impl AbelWeights {
    pub fn new(max_lag: usize) -> Self {
        let (near, far) = (0..max_lag.max(1)).map(abel_panel_weights).unzip();
        Self { near, far }
    }

    pub fn max_lag(&self) -> usize {
        self.near.len()
    }

    /// Coefficient of `q_p` in the integral up to node `n` (unit step).
    #[inline]
    pub fn coefficient(&self, n: usize, p: usize) -> f64 {
        debug_assert!(p <= n && n <= self.near.len());
        let d = n - p;
        let mut w = 0.0;
        if p >= 1 {
            w += self.near[d];
        }
        if d >= 1 {
            w += self.far[d - 1];
        }
        w
    }
}

// ---------------------------------------------------------------------------
// Filon weights

/// `(g0, g1)` = `(\int_0^1 e^{i phi t} dt, \int_0^1 t e^{i phi t} dt)`.
pub fn filon_linear(phi: f64) -> (Complex64, Complex64) {
    if phi.abs() < 0.5 {
        let ip = Complex64::new(0.0, phi);
        let mut pow = Complex64::new(1.0, 0.0);
        let mut fact = 1.0;
        let (mut g0, mut g1) = (Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0));
        for k in 0..24 {
            if k > 0 {
                pow *= ip;
                fact *= k as f64;
            }
            g0 += pow / (fact * (k + 1) as f64);
            g1 += pow / (fact * (k + 2) as f64);
        }
        (g0, g1)
    } else {
        let ip = Complex64::new(0.0, phi);
        let e = Complex64::cis(phi);
        let g0 = (e - 1.0) / ip;
        let g1 = e / ip - (e - 1.0) / (ip * ip);
        (g0, g1)
    }
}

/// `\int_{-d}^{d} sigma^m e^{-i omega sigma} dsigma` for `m = 0, 1, 2`.
pub fn filon_quadratic_moments(omega: f64, d: f64) -> [Complex64; 3] {
    let th = omega * d;
    if th.abs() < 0.5 {
        let mut out = [Complex64::new(0.0, 0.0); 3];
        for (m, o) in out.iter_mut().enumerate() {
            let mut coef = Complex64::new(1.0, 0.0);
            let mut fact = 1.0;
            for n in 0..30 {
                if n > 0 {
                    coef *= Complex64::new(0.0, -omega);
                    fact *= n as f64;
                }
                let p = m + n;
                if p % 2 == 0 {
                    *o += coef / fact * 2.0 * d.powi(p as i32 + 1) / (p + 1) as f64;
                }
            }
        }
        out
    } else {
        let (s, c) = th.sin_cos();
        let w = omega;
        let m0 = 2.0 * s / w;
        // odd moment: \int sigma (cos - i sin) = -i * 2 (sin th - th cos th)/w^2
        let m1 = Complex64::new(0.0, -2.0 * (s - th * c) / (w * w));
        let m2 = 2.0 * ((th * th - 2.0) * s + 2.0 * th * c) / (w * w * w);
        [Complex64::new(m0, 0.0), m1, Complex64::new(m2, 0.0)]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brute(a: f64, b: f64, n: usize, f: impl Fn(f64) -> Complex64) -> Complex64 {
        let rule = GaussRule::new(20);
        let h = (b - a) / n as f64;
        (0..n).map(|k| rule.integrate(a + k as f64 * h, a + (k + 1) as f64 * h, &f)).sum()
    }

    #[test]
    fn gauss_rule_is_exact_for_polynomials() {
        let rule = GaussRule::new(6);
        let v = rule.integrate_real(-1.0, 2.0, |x| x.powi(11) - 3.0 * x.powi(4));
        let exact = (2f64.powi(12) - 1.0) / 12.0 - 3.0 * (32.0 + 1.0) / 5.0;
        assert!((v - exact).abs() < 1e-10);
        let (_, w) = gauss_legendre(17);
        assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-14);
    }

    #[test]
    fn fresnel_matches_direct_quadrature() {
        for &z in &[0.0, 0.003, 0.5, 1.234, 3.0, 5.999, 6.001, 7.5, 12.0] {
            let direct = brute(0.0, z, 400, |v| Complex64::cis(v * v));
            assert!((fresnel_unit(z) - direct).norm() < 1e-13, "z = {z}");
        }
        assert!((fresnel_unit(-2.0) + fresnel_unit(2.0)).norm() < 1e-15);
    }

    #[test]
    fn fresnel_limit_is_reached() {
        let far = fresnel_unit(1e4);
        assert!((far - fresnel_limit()).norm() < 1e-4);
    }

    fn moments(beta: f64, a: f64, b: f64) -> (Complex64, Complex64) {
        let c = kernel_constants(beta);
        kernel_moments(&kernel_antiderivative(beta, a), &kernel_antiderivative(beta, b), c)
    }

    #[test]
    fn kernel_moments_match_direct_quadrature() {
        for &(beta, a, b) in &[(0.0, 0.1, 0.2), (0.25, 0.2, 0.21), (1.0, 0.5, 1.0), (4.0, 0.2, 0.25), (4.0, 0.09, 0.12), (9.0, 0.3, 0.31)] {
            let (m0, m1) = moments(beta, a, b);
            let d0 = brute(a, b, 4000, |t| Complex64::cis(beta / t) / t.sqrt());
            let d1 = brute(a, b, 4000, |t| Complex64::cis(beta / t) * t.sqrt());
            assert!((m0 - d0).norm() < 1e-12 * (1.0 + d0.norm()), "beta={beta} a={a} b={b}: {m0} vs {d0}");
            assert!((m1 - d1).norm() < 1e-12 * (1.0 + d1.norm()), "beta={beta} a={a} b={b}: {m1} vs {d1}");
        }
    }

    #[test]
    fn kernel_moments_from_the_singular_endpoint() {
        // 30-digit values from the closed form with arbitrary-precision Fresnel integrals
        let frozen = [
            (0.01, 0.001, [0.0012943355599280567, -0.0028053284306073167], [1.0130085261701893e-6, -2.8400683046492143e-6]),
            (0.3, 0.0005, [-1.7396417351268971e-6, -3.7226902663090388e-5], [-9.0083334425450465e-10, -1.8611820750577247e-8]),
            (4.0, 0.5, [-0.085353524265580388, 0.0024580634035022457], [-0.040849522598986839, 0.0055845770285276125]),
            (0.5, 0.005, [0.00036705880840131924, 0.00060415709338667984], [1.8648095843593013e-6, 3.0014099375783923e-6]),
        ];
        for (beta, b, e0, e1) in frozen {
            let (m0, m1) = moments(beta, 0.0, b);
            let (e0, e1) = (Complex64::new(e0[0], e0[1]), Complex64::new(e1[0], e1[1]));
            assert!((m0 - e0).norm() < 5e-15 + 1e-11 * e0.norm(), "beta={beta}: {m0} vs {e0}");
            assert!((m1 - e1).norm() < 5e-15 + 1e-11 * e1.norm(), "beta={beta}: {m1} vs {e1}");
        }
    }

    #[test]
    fn kernel_moments_at_zero_beta_are_elementary() {
        let c = kernel_constants(0.0);
        let (m0, m1) = kernel_moments(&kernel_antiderivative(0.0, 0.25), &kernel_antiderivative(0.0, 1.0), c);
        assert!((m0.re - 2.0 * (1.0 - 0.5)).abs() < 1e-15);
        assert!((m1.re - (2.0 / 3.0) * (1.0 - 0.125)).abs() < 1e-15);
    }

    #[test]
    fn abel_weights_integrate_linears_exactly() {
        let n = 40;
        let w = AbelWeights::new(n);
        // \int_0^n (n-s)^{-1/2} ds = 2 sqrt(n), \int_0^n s (n-s)^{-1/2} ds = (4/3) n^{3/2}
        let s0: f64 = (0..=n).map(|p| w.coefficient(n, p)).sum();
        let s1: f64 = (0..=n).map(|p| w.coefficient(n, p) * p as f64).sum();
        let nf = n as f64;
        assert!((s0 - 2.0 * nf.sqrt()).abs() < 1e-12);
        assert!((s1 - 4.0 / 3.0 * nf.powf(1.5)).abs() < 1e-10);
        let (near, far) = abel_panel_weights(0);
        assert!((near - 4.0 / 3.0).abs() < 1e-15 && (far - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn filon_linear_branches_agree() {
        for &phi in &[1e-9, 0.1, 0.49, 0.51, 2.0, 40.0] {
            let (g0, g1) = filon_linear(phi);
            let d0 = brute(0.0, 1.0, 50, |t| Complex64::cis(phi * t));
            let d1 = brute(0.0, 1.0, 50, |t| t * Complex64::cis(phi * t));
            assert!((g0 - d0).norm() < 1e-14 && (g1 - d1).norm() < 1e-14, "phi={phi}");
        }
    }

    #[test]
    fn quadratic_moments_match() {
        for &(w, d) in &[(0.0, 0.3), (1.0, 0.2), (2.4, 0.2), (2.6, 0.2), (80.0, 0.01), (300.0, 0.05)] {
            let got = filon_quadratic_moments(w, d);
            for (m, g) in got.iter().enumerate() {
                let e = brute(-d, d, 40, |s| s.powi(m as i32) * Complex64::cis(-w * s));
                assert!((g - e).norm() < 1e-14, "w={w} d={d} m={m}: {g} vs {e}");
            }
        }
    }
}
