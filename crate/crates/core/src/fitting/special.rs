//! Error-function helpers and the exponential ⊗ Gaussian kernel.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

pub fn erfc(x: f64) -> f64 {
    libm::erfc(x)
}

/// Scaled complementary error function `e^{x²}·erfc(x)`.
pub fn erfcx(x: f64) -> f64 {
    if x < 10.0 {
        return (x * x).exp() * libm::erfc(x);
    }
    // Asymptotic series; the 14th term is below 1e-17 for x ≥ 10.
    let inv2x2 = 1.0 / (2.0 * x * x);
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..14 {
        term *= -((2 * k - 1) as f64) * inv2x2;
        sum += term;
    }
    sum / (x * PI.sqrt())
}

/// Standard normal cumulative distribution.
pub fn norm_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x * FRAC_1_SQRT_2)
}

/// `(H(s)·e^{−s/τ}) ⊗ N(0, σ²)` evaluated at `t`:
/// `½·exp(σ²/2τ² − t/τ)·erfc((σ/τ − t/σ)/√2)`.
///
/// Where the erfc argument is non-negative the product is rewritten as
/// `½·erfcx(u)·exp(−t²/2σ²)`, which cannot overflow. `σ = 0` gives the
/// one-sided exponential (½ at `t = 0`).
pub fn exp_gauss(t: f64, tau: f64, sigma: f64) -> f64 {
    if sigma == 0.0 {
        return match t.partial_cmp(&0.0) {
            Some(std::cmp::Ordering::Greater) => (-t / tau).exp(),
            Some(std::cmp::Ordering::Equal) => 0.5,
            _ => 0.0,
        };
    }
    let u = (sigma / tau - t / sigma) * FRAC_1_SQRT_2;
    if u >= 0.0 {
        0.5 * erfcx(u) * (-0.5 * (t / sigma).powi(2)).exp()
    } else {
        0.5 * (0.5 * (sigma / tau).powi(2) - t / tau).exp() * libm::erfc(u)
    }
}

/// `∫_{−∞}^{t} exp_gauss(s) ds = τ·(Φ(t/σ) − exp_gauss(t))`.
pub fn exp_gauss_integral(t: f64, tau: f64, sigma: f64) -> f64 {
    if sigma == 0.0 {
        return if t > 0.0 { -tau * (-t / tau).exp_m1() } else { 0.0 };
    }
    tau * (norm_cdf(t / sigma) - exp_gauss(t, tau, sigma))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn erfcx_is_continuous_across_branches() {
        let below = erfcx(10.0 - 1e-12);
        let above = erfcx(10.0);
        assert!((below / above - 1.0).abs() < 1e-12, "{below} {above}");
        // erfcx(x) → 1/(x√π)
        assert!((erfcx(1e6) * 1e6 * PI.sqrt() - 1.0).abs() < 1e-12);
        assert!((erfcx(0.0) - 1.0).abs() < 1e-16);
    }

    #[test]
    fn kernel_is_finite_in_the_tails() {
        for t in [-50.0, -5.0, 0.0, 5.0, 500.0] {
            let v = exp_gauss(t, 0.01, 3.0);
            assert!(v.is_finite() && v >= 0.0, "{t} {v}");
        }
    }

    #[test]
    fn integral_reaches_tau() {
        let tau = 1.27;
        let sigma = 0.41;
        assert!((exp_gauss_integral(60.0, tau, sigma) - tau).abs() < 1e-12);
        assert!(exp_gauss_integral(-10.0, tau, sigma).abs() < 1e-12);
        assert!((exp_gauss_integral(60.0, tau, 0.0) - tau).abs() < 1e-12);
    }

    #[test]
    fn integral_derivative_is_kernel() {
        let (tau, sigma) = (0.25, 0.41);
        for t in [-1.0, -0.2, 0.0, 0.3, 2.0] {
            let h = 1e-5;
            let d = (exp_gauss_integral(t + h, tau, sigma) - exp_gauss_integral(t - h, tau, sigma)) / (2.0 * h);
            assert!((d - exp_gauss(t, tau, sigma)).abs() < 1e-8, "{t}");
        }
    }
}
