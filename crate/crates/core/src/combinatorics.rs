//! Binomial coefficients and the order-statistic probability I(i; r, k, N).
//!
//! Populations up to [`EXACT_LIMIT`] units use exact big-integer arithmetic
//! from a cached Pascal triangle, with a single rounding at the final
//! conversion to `f64`. Larger populations fall back to log-gamma.

use std::sync::OnceLock;

use num_bigint::BigUint;
use num_traits::{ToPrimitive, Zero};
use statrs::function::factorial::ln_binomial;

use crate::error::{Result, RssError};

/// Largest population size handled with exact arithmetic.
pub const EXACT_LIMIT: usize = 300;

fn pascal() -> &'static [Vec<BigUint>] {
    static TABLE: OnceLock<Vec<Vec<BigUint>>> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut rows: Vec<Vec<BigUint>> = Vec::with_capacity(EXACT_LIMIT + 1);
        rows.push(vec![BigUint::from(1u32)]);
        for n in 1..=EXACT_LIMIT {
            let prev = &rows[n - 1];
            let mut row = Vec::with_capacity(n + 1);
            row.push(BigUint::from(1u32));
            for k in 1..n {
                row.push(&prev[k - 1] + &prev[k]);
            }
            row.push(BigUint::from(1u32));
            rows.push(row);
        }
        rows
    })
}

/// Exact C(n, k) for `n ≤ EXACT_LIMIT`; zero outside the support.
pub fn binomial_exact(n: i64, k: i64) -> BigUint {
    if n < 0 || k < 0 || k > n {
        return BigUint::zero();
    }
    let (n, k) = (n as usize, k as usize);
    assert!(n <= EXACT_LIMIT, "exact binomial requested for n = {n} > {EXACT_LIMIT}");
    pascal()[n][k].clone()
}

/// Borrowing variant of [`binomial_exact`] for hot loops; `None` means zero.
pub(crate) fn binomial_ref(n: i64, k: i64) -> Option<&'static BigUint> {
    if n < 0 || k < 0 || k > n {
        return None;
    }
    Some(&pascal()[n as usize][k as usize])
}

/// ln C(n, k), or `-inf` outside the support.
pub fn ln_binomial_signed(n: i64, k: i64) -> f64 {
    if n < 0 || k < 0 || k > n {
        return f64::NEG_INFINITY;
    }
    ln_binomial(n as u64, k as u64)
}

/// num / den rounded once to `f64`.
pub fn ratio_to_f64(num: &BigUint, den: &BigUint) -> f64 {
    assert!(!den.is_zero(), "zero denominator");
    if num.is_zero() {
        return 0.0;
    }
    // Scale so that the integer quotient carries at least 64 significant bits.
    let shift = (den.bits() as i64 - num.bits() as i64 + 66).max(0) as u64;
    let q = (num << shift) / den;
    let mantissa = q.to_f64().unwrap_or(f64::INFINITY);
    mantissa * 2f64.powi(-(shift as i32))
}

fn check_order_args(i: usize, r: usize, k: usize, n: usize) -> Result<()> {
    if i == 0 || i > n || r == 0 || r > k || k > n {
        return Err(RssError::invalid(format!(
            "I(i; r, k, N) requires 1 ≤ i ≤ N and 1 ≤ r ≤ k ≤ N, got i={i}, r={r}, k={k}, N={n}"
        )));
    }
    Ok(())
}

/// Probability that the unit with population rank `i` takes rank `r` in a
/// random set of size `k` drawn without replacement from `n` units:
/// C(i−1, r−1) C(n−i, k−r) / C(n, k).
pub fn order_statistic_prob(i: usize, r: usize, k: usize, n: usize) -> Result<f64> {
    check_order_args(i, r, k, n)?;
    let (i, r, k, n) = (i as i64, r as i64, k as i64, n as i64);
    if n as usize <= EXACT_LIMIT {
        let num = binomial_exact(i - 1, r - 1) * binomial_exact(n - i, k - r);
        Ok(ratio_to_f64(&num, &binomial_exact(n, k)))
    } else {
        Ok(order_statistic_prob_ln(i, r, k, n))
    }
}

fn order_statistic_prob_ln(i: i64, r: i64, k: i64, n: i64) -> f64 {
    let ln = ln_binomial_signed(i - 1, r - 1) + ln_binomial_signed(n - i, k - r)
        - ln_binomial_signed(n, k);
    ln.exp()
}

/// Matrix of I(i; r, k, n) with rows i = 1..n and columns r = 1..k.
pub fn order_statistic_matrix(k: usize, n: usize) -> Result<Vec<Vec<f64>>> {
    (1..=n)
        .map(|i| (1..=k).map(|r| order_statistic_prob(i, r, k, n)).collect())
        .collect()
}
