use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};

/// Coefficients of `H_{p0}(z + lambda) = sum_k c_k H_{p0-k}(z)` with `p0 = p - 1`,
/// `c_k = C(p0, k) sqrt((p0-k)!/p0!) lambda^k`, stored as `ln c_k^2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HermiteShift {
    pub p: usize,
    pub lambda: f64,
    /// `ln c_k^2` for `k = 0..p-1`; `-inf` for `k >= 1` when `lambda = 0`.
    pub log_coef_sq: Vec<f64>,
}

fn ln_factorial(m: usize) -> f64 {
    ln_gamma(m as f64 + 1.0)
}

pub fn hermite_shift_coeffs(p: usize, lambda: f64) -> Result<HermiteShift> {
    if p < 2 {
        return Err(Error::input("p must be at least 2"));
    }
    if !lambda.is_finite() {
        return Err(Error::input("lambda must be finite"));
    }
    let p0 = p - 1;
    let ln_p0_fact = ln_factorial(p0);
    let ln_abs = lambda.abs().ln();
    let log_coef_sq = (0..p)
        .map(|k| {
            if k == 0 {
                return 0.0;
            }
            if lambda == 0.0 {
                return f64::NEG_INFINITY;
            }
            let ln_binom = ln_p0_fact - ln_factorial(k) - ln_factorial(p0 - k);
            2.0 * ln_binom + ln_factorial(p0 - k) - ln_p0_fact + 2.0 * k as f64 * ln_abs
        })
        .collect();
    Ok(HermiteShift { p, lambda, log_coef_sq })
}

impl HermiteShift {
    /// Signed coefficients `c_k`; overflows to infinity for large `p`.
    pub fn coefficients(&self) -> Vec<f64> {
        self.log_coef_sq
            .iter()
            .enumerate()
            .map(|(k, l)| {
                let sign = if self.lambda < 0.0 && k % 2 == 1 { -1.0 } else { 1.0 };
                sign * (0.5 * l).exp()
            })
            .collect()
    }

    /// `min_{1 <= j <= j_max} (ln c_j^2 - j/2)`.
    pub fn growth_floor(&self, j_max: usize) -> f64 {
        (1..=j_max.min(self.p - 1))
            .map(|j| self.log_coef_sq[j] - j as f64 / 2.0)
            .fold(f64::INFINITY, f64::min)
    }

    /// `ln sum_{k >= s} c_k^2`, the error of keeping the `s` highest-degree terms.
    pub fn log_tail_mass(&self, s: usize) -> f64 {
        let tail = &self.log_coef_sq[s.min(self.p)..];
        let m = tail.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if m == f64::NEG_INFINITY {
            return m;
        }
        m + tail.iter().map(|l| (l - m).exp()).sum::<f64>().ln()
    }
}
