use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{Controls, SbeMethod};
use crate::linalg::{Clusters, DenseMatrix};
use crate::model_spec::DesignMatrix;
use crate::rng::{derive_seed, gaussian_vec, rng_for, rng_from_seed};
use crate::sparsity_tests::{run_test_battery, BatteryConfig};
use crate::stats::binomial_sd;

/// Source of the control matrix held fixed across replications.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ControlSource {
    /// `n x p` i.i.d. standard Gaussian controls drawn once from the design seed.
    SyntheticGaussian,
    /// A given design (typically built from a real dataset's recipe).
    Design(DesignMatrix),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationDesign {
    pub w_source: ControlSource,
    pub n: usize,
    pub p: usize,
    pub sigma_y: f64,
    pub sigma_d: f64,
    pub reps: usize,
    pub level: f64,
    pub cluster_ids: Option<Clusters>,
    pub seed: u64,
    pub method: SbeMethod,
    pub include_reduced_form: bool,
}

impl SimulationDesign {
    /// Null design with Gaussian controls, unit variances and post-double selection.
    pub fn gaussian_null(n: usize, p: usize, reps: usize, level: f64, seed: u64) -> Self {
        SimulationDesign {
            w_source: ControlSource::SyntheticGaussian,
            n,
            p,
            sigma_y: 1.0,
            sigma_d: 1.0,
            reps,
            level,
            cluster_ids: None,
            seed,
            method: SbeMethod::PostDoubleLasso,
            include_reduced_form: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.reps == 0 {
            return Err(Error::input("reps must be at least 1"));
        }
        if self.p >= self.n {
            return Err(Error::input(format!("p = {} must be below n = {}", self.p, self.n)));
        }
        if !(self.sigma_y > 0.0 && self.sigma_d > 0.0) {
            return Err(Error::input("noise scales must be positive"));
        }
        if !(self.level > 0.0 && self.level < 1.0) {
            return Err(Error::input("level must lie in (0, 1)"));
        }
        if let ControlSource::Design(d) = &self.w_source {
            if d.rows() != self.n {
                return Err(Error::input("design rows do not match n"));
            }
        }
        if let Some(c) = &self.cluster_ids {
            c.check_len(self.n)?;
        }
        Ok(())
    }

    pub fn controls(&self) -> Result<Controls> {
        let design = match &self.w_source {
            ControlSource::SyntheticGaussian => {
                let mut rng = rng_from_seed(derive_seed(self.seed, u64::MAX));
                let w = DenseMatrix::from_col_major(self.n, self.p, gaussian_vec(&mut rng, self.n * self.p))?;
                DesignMatrix::with_intercept(&w)?
            }
            ControlSource::Design(d) => d.clone(),
        };
        Controls::new(design)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RejectionRate {
    pub test: String,
    pub rate: f64,
    pub mc_sd: f64,
    /// The Monte Carlo sd is uninformative (one replication).
    pub sd_degenerate: bool,
    pub reps_used: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NullSizeResult {
    pub n: usize,
    pub p: usize,
    pub reps: usize,
    pub level: f64,
    pub failed_reps: usize,
    pub rates: Vec<RejectionRate>,
    /// Per-test p-values in replication order (successful replications only).
    pub p_values: Vec<(String, Vec<f64>)>,
}

impl NullSizeResult {
    pub fn rate(&self, test: &str) -> Option<&RejectionRate> {
        self.rates.iter().find(|r| r.test == test)
    }

    pub fn p_values_for(&self, test: &str) -> Option<&[f64]> {
        self.p_values.iter().find(|(t, _)| t == test).map(|(_, v)| v.as_slice())
    }
}

/// Draws independent Gaussian outcome and treatment for each replication,
/// holding the controls fixed, and records the test battery's rejections.
pub fn simulate_null_size(design: &SimulationDesign) -> Result<NullSizeResult> {
    design.validate()?;
    let controls = design.controls()?;
    let cfg = BatteryConfig {
        level: design.level,
        method: design.method,
        include_reduced_form: design.include_reduced_form,
        ..Default::default()
    };
    let (sy, sd) = (design.sigma_y, design.sigma_d);
    simulate_rejection_rates(
        &controls,
        design.reps,
        design.seed,
        design.cluster_ids.as_ref(),
        &cfg,
        |rng, n| {
            let y: Vec<f64> = gaussian_vec(rng, n).into_iter().map(|v| sy * v).collect();
            let d: Vec<f64> = gaussian_vec(rng, n).into_iter().map(|v| sd * v).collect();
            (y, d)
        },
    )
}

/// Rejection rates of the test battery over `reps` draws of `(Y, D)` from
/// `draw`, which receives a per-replication generator and the sample size.
pub fn simulate_rejection_rates<F>(
    controls: &Controls,
    reps: usize,
    seed: u64,
    clusters: Option<&Clusters>,
    cfg: &BatteryConfig,
    draw: F,
) -> Result<NullSizeResult>
where
    F: Fn(&mut crate::rng::Rng, usize) -> (Vec<f64>, Vec<f64>) + Sync,
{
    if reps == 0 {
        return Err(Error::input("reps must be at least 1"));
    }
    let n = controls.rows();
    let per_rep: Vec<Result<Vec<(&'static str, f64)>>> = (0..reps)
        .into_par_iter()
        .map(|rep| {
            let mut rng = rng_for(seed, rep as u64);
            let (y, d) = draw(&mut rng, n);
            run_test_battery(&y, &d, controls, clusters, cfg).map(|b| b.p_values())
        })
        .collect();
    summarize(n, controls.cols() - controls.unpenalized().len(), reps, cfg.level, per_rep)
}

fn summarize(
    n: usize,
    p: usize,
    reps: usize,
    level: f64,
    per_rep: Vec<Result<Vec<(&'static str, f64)>>>,
) -> Result<NullSizeResult> {
    let mut labels: Vec<&'static str> = Vec::new();
    let mut p_values: Vec<Vec<f64>> = Vec::new();
    let mut failed = 0;
    for rep in per_rep {
        match rep {
            Ok(ps) => {
                for (label, p) in ps {
                    let k = match labels.iter().position(|l| *l == label) {
                        Some(k) => k,
                        None => {
                            labels.push(label);
                            p_values.push(Vec::new());
                            labels.len() - 1
                        }
                    };
                    p_values[k].push(p);
                }
            }
            Err(e) if e.is_input_error() => return Err(e),
            Err(_) => failed += 1,
        }
    }
    if failed == reps {
        return Err(Error::Numerical("every replication failed".into()));
    }
    let rates = labels
        .iter()
        .zip(&p_values)
        .map(|(label, ps)| {
            let rejections = ps.iter().filter(|&&p| p < level).count();
            let rate = rejections as f64 / ps.len() as f64;
            RejectionRate {
                test: label.to_string(),
                rate,
                mc_sd: binomial_sd(rate, ps.len()),
                sd_degenerate: ps.len() <= 1,
                reps_used: ps.len(),
            }
        })
        .collect();
    Ok(NullSizeResult {
        n,
        p,
        reps,
        level,
        failed_reps: failed,
        rates,
        p_values: labels.iter().map(|l| l.to_string()).zip(p_values).collect(),
    })
}
