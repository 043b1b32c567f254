use serde::{Deserialize, Serialize};

use super::ols::OlsFit;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EfficiencyReport {
    pub p_over_n: f64,
    pub kappa: f64,
    /// False when no true propensity-error variance was supplied and kappa defaults to 1.
    pub kappa_estimated: bool,
    /// Ratio of the oracle standard error to the OLS standard error.
    pub gain: f64,
    /// `1 - gain`: the largest relative standard-error reduction available from sparsity.
    pub se_reduction: f64,
    pub sigma2_dtilde_hat: f64,
}

/// `sqrt((1 - p/n) kappa)`
pub fn efficiency_gain(p_over_n: f64, kappa: f64) -> f64 {
    ((1.0 - p_over_n) * kappa).sqrt()
}

/// Smallest `p/n` at which the standard-error reduction `1 - gain` reaches `target`.
pub fn min_p_over_n_for_reduction(target: f64, kappa: f64) -> f64 {
    1.0 - (1.0 - target).powi(2) / kappa
}

pub fn efficiency_report(ols: &OlsFit, n: usize, p: usize, sigma2_dtilde_true: Option<f64>) -> Result<EfficiencyReport> {
    if p >= n {
        return Err(Error::Regime { rows: n, cols: p, rank: ols.rank_used });
    }
    let sigma2_dtilde_hat = ols.d_ddot_sq() / (n - p) as f64;
    let (kappa, kappa_estimated) = match sigma2_dtilde_true {
        Some(s) if s > 0.0 && s.is_finite() => (sigma2_dtilde_hat / s, true),
        Some(_) => return Err(Error::input("true propensity-error variance must be positive")),
        None => (1.0, false),
    };
    let p_over_n = p as f64 / n as f64;
    let gain = efficiency_gain(p_over_n, kappa);
    Ok(EfficiencyReport {
        p_over_n,
        kappa,
        kappa_estimated,
        gain,
        se_reduction: 1.0 - gain,
        sigma2_dtilde_hat,
    })
}
