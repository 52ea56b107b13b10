//! Kernel branch conventions shared by every solver and reconstruction route.
//!
//! `\int_R e^{-i lambda xi^2} dxi = sqrt(pi/lambda) e^{-i pi/4}` for `lambda > 0`;
//! the opposite sign of `lambda` flips the phase.

use num_complex::Complex;

use crate::scalar::{cis, Real};

/// `e^{-i pi/4}`: forward-in-time branch of the Abel kernel.
pub fn forward_phase<T: Real>() -> Complex<T> {
    cis(-T::FRAC_PI_4())
}

/// `e^{+i pi/4}`: backward-in-time branch.
pub fn backward_phase<T: Real>() -> Complex<T> {
    cis(T::FRAC_PI_4())
}

/// `sqrt(pi)` prefactor of the operator `L`.
pub fn abel_prefactor<T: Real>() -> T {
    T::PI().sqrt()
}

/// `1/(2 pi)`: the inverse-transform factor linking `L` to the origin trace.
pub fn trace_factor<T: Real>() -> T {
    T::one() / T::TAU()
}

/// `1/sqrt(4 pi i tau)` with the branch of `(i tau)^{1/2}` on the principal sheet.
pub fn kernel_amplitude<T: Real>(tau: T) -> Complex<T> {
    let r = (T::lit(4.0) * T::PI() * tau.abs()).sqrt().recip();
    if tau > T::zero() {
        forward_phase::<T>() * r
    } else {
        backward_phase::<T>() * r
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn phases_are_conjugate_unit_numbers() {
        let f = forward_phase::<f64>();
        let b = backward_phase::<f64>();
        assert!((f * b - Complex::new(1.0, 0.0)).norm() < 1e-15);
        assert!((f.arg() + std::f64::consts::FRAC_PI_4).abs() < 1e-15);
    }

    #[test]
    fn amplitude_squares_to_inverse_of_4_pi_i_tau() {
        for tau in [0.3f64, -1.7] {
            let a = kernel_amplitude(tau);
            let expected = Complex::new(0.0, 4.0 * std::f64::consts::PI * tau).inv();
            assert!((a * a - expected).norm() < 1e-14);
        }
    }
}
