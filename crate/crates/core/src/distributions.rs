//! Numerical helpers for the reference distributions.

use statrs::distribution::{ContinuousCDF, Normal};
use statrs::function::beta::beta_reg;

/// Standard normal quantile function Φ⁻¹(p), `p` in (0, 1).
pub fn standard_normal_quantile(p: f64) -> f64 {
    // Normal::new(0, 1) cannot fail.
    Normal::new(0.0, 1.0).unwrap().inverse_cdf(p)
}

/// Upper `alpha/2` standard normal quantile.
pub fn z_two_sided(alpha: f64) -> f64 {
    standard_normal_quantile(1.0 - alpha / 2.0)
}

/// Quantile of Beta(a, b) by bisection on the regularized incomplete beta
/// function. Bisection halves a bracket of width one, so 200 steps reach the
/// limits of `f64` well below the 1e-10 relative target.
pub fn beta_quantile(a: f64, b: f64, p: f64) -> f64 {
    if p <= 0.0 {
        return 0.0;
    }
    if p >= 1.0 {
        return 1.0;
    }
    let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if beta_reg(a, b, mid) < p {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// CDF of the r-th order statistic of `k` i.i.d. draws evaluated where the
/// parent CDF equals `f`: P(Beta(r, k − r + 1) ≤ f).
pub fn order_statistic_cdf(f: f64, r: usize, k: usize) -> f64 {
    if f <= 0.0 {
        return 0.0;
    }
    if f >= 1.0 {
        return 1.0;
    }
    beta_reg(r as f64, (k - r + 1) as f64, f)
}
