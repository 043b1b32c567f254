use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal, StudentT};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{decompose, dot, DenseMatrix};
use crate::rng::{derive_seed, gaussian_vec, rng_for, rng_from_seed, Rng};
use crate::stats::{ks_pvalue, ks_statistic, normal_cdf};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorLaw {
    Gaussian,
    /// Student t with 8 degrees of freedom, scaled to unit variance.
    ScaledT8,
    /// Gaussian with observation-specific variances drawn once from U(0.25, 2.25).
    HeteroskedasticGaussian,
}

impl std::str::FromStr for ErrorLaw {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gaussian" => Ok(ErrorLaw::Gaussian),
            "t8" | "scaled-t8" | "scaled_t8" => Ok(ErrorLaw::ScaledT8),
            "hetero" | "heteroskedastic" | "heteroskedastic-gaussian" => Ok(ErrorLaw::HeteroskedasticGaussian),
            other => Err(Error::input(format!("unknown error law `{other}`"))),
        }
    }
}

impl ErrorLaw {
    /// Fourth moment of the unit-variance innovation.
    fn kurtosis(self) -> f64 {
        match self {
            ErrorLaw::ScaledT8 => 4.5,
            _ => 3.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadraticFormMc {
    pub n: usize,
    pub p: usize,
    pub reps: usize,
    pub law: ErrorLaw,
    /// `max_r |psi' H psi - E psi' H psi| / (2 sqrt(p))`
    pub lln_deviation: f64,
    pub clt_ks_statistic: f64,
    pub clt_ks_pvalue: f64,
    /// `H = I`, where the centered sum of squares is standardized instead.
    pub identity_fallback: bool,
}

/// Draws `psi` with independent entries and studies `psi' H psi` for a
/// fixed random rank-`p` projection `H` (the identity when `p = n`).
pub fn quadratic_form_limits_mc(n: usize, p: usize, reps: usize, law: ErrorLaw, seed: u64) -> Result<QuadraticFormMc> {
    if p == 0 || p > n {
        return Err(Error::input("need 1 <= p <= n"));
    }
    if reps < 2 {
        return Err(Error::input("reps must be at least 2"));
    }
    let identity = p == n;
    let mut setup = rng_from_seed(derive_seed(seed, u64::MAX));
    let sigma2: Vec<f64> = match law {
        ErrorLaw::HeteroskedasticGaussian => (0..n).map(|_| setup.random_range(0.25..2.25)).collect(),
        _ => vec![1.0; n],
    };
    let sigma: Vec<f64> = sigma2.iter().map(|v| v.sqrt()).collect();
    let bundle = if identity {
        None
    } else {
        let g = DenseMatrix::from_col_major(n, p, gaussian_vec(&mut setup, n * p))?;
        Some(decompose(&g)?)
    };
    let (lev, omega, mean_form) = match &bundle {
        Some(b) => {
            let lev = b.leverages();
            let omega = (2.0 * b.weighted_offdiag_norm(&sigma2)?).sqrt();
            let mean = dot(&lev, &sigma2);
            (lev, omega, mean)
        }
        None => {
            let var: f64 = sigma2.iter().map(|s| (law.kurtosis() - 1.0) * s * s).sum();
            (vec![1.0; n], var.sqrt(), sigma2.iter().sum())
        }
    };
    if !(omega > 0.0) {
        return Err(Error::Numerical("degenerate quadratic-form variance".into()));
    }
    let t8 = StudentT::new(8.0).expect("valid degrees of freedom");
    let t_scale = (6.0f64 / 8.0).sqrt();
    let draw = |rng: &mut Rng| -> Vec<f64> {
        (0..n)
            .map(|i| {
                let e: f64 = match law {
                    ErrorLaw::ScaledT8 => t8.sample(rng) * t_scale,
                    _ => StandardNormal.sample(rng),
                };
                sigma[i] * e
            })
            .collect()
    };
    let lln_scale = 2.0 * (p as f64).sqrt();
    let results: Vec<(f64, f64)> = (0..reps)
        .into_par_iter()
        .map(|r| {
            let psi = draw(&mut rng_for(seed, r as u64));
            let diag: f64 = psi.iter().zip(&lev).map(|(x, l)| l * x * x).sum();
            match &bundle {
                Some(b) => {
                    let c = b.coordinates(&psi);
                    let form = dot(&c, &c);
                    ((form - mean_form).abs() / lln_scale, (form - diag) / omega)
                }
                None => {
                    let centered: f64 = psi.iter().zip(&sigma2).map(|(x, s)| x * x - s).sum();
                    ((diag - mean_form).abs() / lln_scale, centered / omega)
                }
            }
        })
        .collect();
    let lln_deviation = results.iter().map(|r| r.0).fold(0.0, f64::max);
    let stats: Vec<f64> = results.iter().map(|r| r.1).collect();
    let ks = ks_statistic(&stats, normal_cdf);
    Ok(QuadraticFormMc {
        n,
        p,
        reps,
        law,
        lln_deviation,
        clt_ks_statistic: ks,
        clt_ks_pvalue: ks_pvalue(ks, reps),
        identity_fallback: identity,
    })
}
