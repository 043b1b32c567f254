//! Monte Carlo and closed-form checks of the rarity of sparse
//! representations and of quadratic-form limit theory.

pub mod hermite_shift;
pub mod quadratic;
pub mod sparsity;

use serde::{Deserialize, Serialize};

pub use hermite_shift::{hermite_shift_coeffs, HermiteShift};
pub use quadratic::{quadratic_form_limits_mc, ErrorLaw, QuadraticFormMc};
pub use sparsity::{
    bernoulli_category_experiment, haar_rotation, haar_rotation_with, rotation_log_bound, rotation_rarity_experiment,
    rotation_rarity_with_s, sparse_approx_error, sparsity_index, BetaCheck, CategoryExperiment, RotationRarity,
    SparsityCheck,
};

/// One output row: `(experiment, p, parameters, estimate, bound, mc_sd)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TheoryRow {
    pub experiment: String,
    pub p: usize,
    pub parameters: String,
    pub estimate: f64,
    pub bound: Option<f64>,
    pub mc_sd: Option<f64>,
}

impl RotationRarity {
    pub fn rows(&self) -> Vec<TheoryRow> {
        let mut rows = vec![TheoryRow {
            experiment: "rotation_sparse_fraction".into(),
            p: self.p,
            parameters: format!("s={};trials={}", self.s, self.trials),
            estimate: self.mc_probability,
            bound: Some(self.log_bound.exp()),
            mc_sd: Some(self.mc_sd),
        }];
        rows.push(TheoryRow {
            experiment: "rotation_log_bound".into(),
            p: self.p,
            parameters: format!("s={}", self.s),
            estimate: self.log_bound,
            bound: None,
            mc_sd: None,
        });
        for c in &self.beta_checks {
            rows.push(TheoryRow {
                experiment: "rotation_beta_identity".into(),
                p: self.p,
                parameters: format!("s={};x={}", self.s, c.x),
                estimate: c.mc_probability,
                bound: Some(c.analytic),
                mc_sd: Some(c.mc_sd),
            });
        }
        rows
    }
}

impl CategoryExperiment {
    pub fn rows(&self) -> Vec<TheoryRow> {
        let params = format!("q={};K={};s={};trials={}", self.q, self.k_zeros, self.s, self.trials);
        vec![
            TheoryRow {
                experiment: "categories_singular_rate".into(),
                p: self.p,
                parameters: params.clone(),
                estimate: self.singular_rate,
                // The singularity rate only has an asymptotic rate, no finite-p bound.
                bound: None,
                mc_sd: Some(crate::stats::binomial_sd(self.singular_rate, self.trials)),
            },
            TheoryRow {
                experiment: "categories_sparsity_rate".into(),
                p: self.p,
                parameters: params,
                estimate: self.sparsity_rate,
                bound: Some(self.theorem2_bound),
                mc_sd: Some(self.sparsity_mc_sd),
            },
        ]
    }
}

impl HermiteShift {
    /// Growth floor over `1 <= j <= sparsity_index(p)` and `ln` of the tail
    /// mass at `s = sparsity_index(p)` against `ln(s/p)`.
    pub fn summary_rows(&self) -> Vec<TheoryRow> {
        let s = sparsity_index(self.p);
        vec![
            TheoryRow {
                experiment: "hermite_growth_floor".into(),
                p: self.p,
                parameters: format!("lambda={};j_max={s}", self.lambda),
                estimate: self.growth_floor(s),
                bound: None,
                mc_sd: None,
            },
            TheoryRow {
                experiment: "hermite_log_tail_mass".into(),
                p: self.p,
                parameters: format!("lambda={};s={s}", self.lambda),
                estimate: self.log_tail_mass(s),
                bound: Some((s as f64 / self.p as f64).ln()),
                mc_sd: None,
            },
        ]
    }

    /// One row per `k`, with the growth reference `k/2` as the bound column.
    pub fn rows(&self) -> Vec<TheoryRow> {
        self.log_coef_sq
            .iter()
            .enumerate()
            .map(|(k, &l)| TheoryRow {
                experiment: "hermite_log_coef_sq".into(),
                p: self.p,
                parameters: format!("lambda={};k={k}", self.lambda),
                estimate: l,
                bound: Some(k as f64 / 2.0),
                mc_sd: None,
            })
            .collect()
    }
}

impl QuadraticFormMc {
    pub fn rows(&self) -> Vec<TheoryRow> {
        let law = serde_json::to_value(self.law).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default();
        let params = format!("n={};reps={};law={law}", self.n, self.reps);
        vec![
            TheoryRow {
                experiment: "qf_clt_ks".into(),
                p: self.p,
                parameters: params.clone(),
                estimate: self.clt_ks_statistic,
                bound: Some(0.05),
                mc_sd: None,
            },
            TheoryRow {
                experiment: "qf_lln_deviation".into(),
                p: self.p,
                parameters: params,
                estimate: self.lln_deviation,
                bound: None,
                mc_sd: None,
            },
        ]
    }
}

pub fn theory_csv(rows: &[TheoryRow]) -> crate::Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["experiment", "p", "parameters", "estimate", "bound", "mc_sd"])?;
    let opt = |v: Option<f64>| v.map(|x| format!("{x}")).unwrap_or_default();
    for r in rows {
        w.write_record([
            r.experiment.clone(),
            r.p.to_string(),
            r.parameters.clone(),
            format!("{}", r.estimate),
            opt(r.bound),
            opt(r.mc_sd),
        ])?;
    }
    let bytes = w.into_inner().map_err(|e| crate::Error::Input(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}
