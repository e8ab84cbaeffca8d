//! Special functions needed by the environment model: log-binomials, the
//! Legendre polynomial through its three-term recurrence, and the
//! binomial-square power sum Σ_j C(K−1, j)² z^j.
//!
//! Values that overflow f64 for large K are returned as [`ScaledReal`].

mod scaled;

pub use scaled::ScaledReal;

use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::sum::CompensatedSum;

/// Largest `n` for which `log_binomial` goes through exact integers.
pub const EXACT_BINOMIAL_MAX_N: u64 = 60;

/// Exact C(n, k) when it fits in a `u128`.
pub fn binomial_exact(n: u64, k: u64) -> Option<u128> {
    if k > n {
        return Some(0);
    }
    let k = k.min(n - k);
    let mut c: u128 = 1;
    for i in 0..k {
        // c·(n−i) is divisible by (i+1) at every step.
        c = c.checked_mul((n - i) as u128)? / (i + 1) as u128;
    }
    Some(c)
}

/// Natural log of C(n, k).
pub fn log_binomial(n: u64, k: u64) -> Result<f64> {
    if k > n {
        return Err(Error::InvalidInput(format!(
            "binomial C({n}, {k}) has k > n"
        )));
    }
    if k == 0 || k == n {
        return Ok(0.0);
    }
    if n <= EXACT_BINOMIAL_MAX_N {
        let c = binomial_exact(n, k).expect("C(60, k) fits in u128");
        return Ok((c as f64).ln());
    }
    Ok(ln_gamma(n as f64 + 1.0) - ln_gamma(k as f64 + 1.0) - ln_gamma((n - k) as f64 + 1.0))
}

/// Log-binomials ln C(m, j) for j = 0..=m, built with one log-gamma per
/// entry and exact integers for small `m`.
pub fn log_binomial_row(m: u64) -> Vec<f64> {
    if m <= EXACT_BINOMIAL_MAX_N {
        return (0..=m)
            .map(|j| (binomial_exact(m, j).expect("small binomial") as f64).ln())
            .collect();
    }
    let lg_m = ln_gamma(m as f64 + 1.0);
    let half = (m / 2) as usize;
    let mut row = vec![0.0; m as usize + 1];
    for j in 1..=half {
        let v = lg_m - ln_gamma(j as f64 + 1.0) - ln_gamma((m as usize - j) as f64 + 1.0);
        row[j] = v;
        row[m as usize - j] = v;
    }
    row
}

/// Legendre polynomial P_n(z) by the upward recurrence
/// (k+1)P_{k+1} = (2k+1) z P_k − k P_{k−1}, rescaled whenever the
/// iterates grow past 2^256.
///
/// For z ≥ 1 the polynomial is the dominant solution of the recurrence, so
/// the upward direction is stable. For |z| < 1 the iterates stay bounded.
pub fn legendre_p(n: u64, z: f64) -> ScaledReal {
    if n == 0 {
        return ScaledReal::ONE;
    }
    let rescale = 2f64.powi(256);
    let mut prev = 1.0;
    let mut curr = z;
    let mut exponent: i64 = 0;
    for k in 1..n {
        let kf = k as f64;
        let next = ((2.0 * kf + 1.0) * z * curr - kf * prev) / (kf + 1.0);
        prev = curr;
        curr = next;
        if curr.abs() > rescale {
            curr /= rescale;
            prev /= rescale;
            exponent += 256;
        }
    }
    ScaledReal::from_parts(curr, exponent)
}

/// Direct log-space evaluation of Σ_{j=0}^{K−1} C(K−1, j)² z^j.
///
/// This is the series side of
/// Σ_j C(K−1, j)² z^j = (1−z)^{K−1} P_{K−1}((1+z)/(1−z)).
pub fn binomsq_powsum(k: u64, z: f64) -> Result<ScaledReal> {
    if k < 1 {
        return Err(Error::InvalidInput("binomsq_powsum needs K >= 1".into()));
    }
    if !z.is_finite() || z < 0.0 {
        return Err(Error::InvalidInput(format!(
            "binomsq_powsum needs finite z >= 0, got {z}"
        )));
    }
    if z == 0.0 {
        return Ok(ScaledReal::ONE);
    }
    let ln_z = z.ln();
    let row = log_binomial_row(k - 1);
    let logs: Vec<f64> = row
        .iter()
        .enumerate()
        .map(|(j, lc)| 2.0 * lc + j as f64 * ln_z)
        .collect();
    Ok(log_sum_exp_scaled(&logs))
}

/// (1−z)^{K−1} P_{K−1}((1+z)/(1−z)), the closed-form side of the
/// binomial-square identity. Requires 0 ≤ z < 1.
pub fn binomsq_closed(k: u64, z: f64) -> Result<ScaledReal> {
    if k < 1 || !(0.0..1.0).contains(&z) {
        return Err(Error::InvalidInput(format!(
            "binomsq_closed needs K >= 1 and 0 <= z < 1, got K={k}, z={z}"
        )));
    }
    let arg = (1.0 + z) / (1.0 - z);
    Ok(ScaledReal::from_f64(1.0 - z).powi(k - 1) * legendre_p(k - 1, arg))
}

/// Σ exp(logs[i]) as a [`ScaledReal`], accumulated in index order.
pub fn log_sum_exp_scaled(logs: &[f64]) -> ScaledReal {
    let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return ScaledReal::ZERO;
    }
    let s: CompensatedSum = logs.iter().map(|l| (l - max).exp()).collect();
    ScaledReal::from_ln(max, 1.0) * ScaledReal::from_f64(s.value())
}
