//! Tests of the sparsity assumption: the Hausman comparison of OLS with a
//! sparsity-based estimator, and the residual comparison of lasso and OLS
//! sums of squares.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{
    double_t_selection, plugin_lasso, post_double_selection_from, Controls, LassoOptions, OlsFit, SbeFit, SbeMethod,
    DOUBLE_T_THRESHOLD,
};
use crate::linalg::{dot, Clusters, ProjectionBundle};
use crate::stats::normal_sf;

/// `se_h` at or below this multiple of the OLS standard error counts as zero.
pub const HAUSMAN_DEGENERATE_RATIO: f64 = 1e-10;
/// Threshold on `D_hat' D_hat` for the propensity residuals.
pub const DEGENERATE_PROPENSITY_TOL: f64 = 1e-12;
/// Relative slack allowed in the lasso-vs-OLS residual sum of squares bound.
pub const LOWER_BOUND_SLACK: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HausmanReport {
    pub method: SbeMethod,
    pub beta_ols: f64,
    pub beta_star: f64,
    pub diff: f64,
    pub se_h: f64,
    pub z: f64,
    pub p_two_sided: f64,
    pub clustered: bool,
    pub degenerate: bool,
}

pub fn hausman_test(ols: &OlsFit, sbe: &SbeFit, clusters: Option<&Clusters>) -> Result<HausmanReport> {
    let n = ols.n();
    if sbe.d_hat.len() != n || sbe.u_hat_sbe.len() != n {
        return Err(Error::input("OLS and SBE fits have different sample sizes"));
    }
    if let Some(c) = clusters {
        c.check_len(n)?;
    }
    let dh = dot(&sbe.d_hat, &sbe.d_hat);
    if dh <= DEGENERATE_PROPENSITY_TOL {
        return Err(Error::DegeneratePropensity(dh));
    }
    let dd = ols.d_ddot_sq();
    let score: Vec<f64> = (0..n)
        .map(|i| (ols.d_ddot[i] / dd - sbe.d_hat[i] / dh) * sbe.u_hat_sbe[i])
        .collect();
    let var = match clusters {
        None => dot(&score, &score),
        Some(c) => c.block_sum_sq(&score),
    };
    let se_h = var.sqrt();
    let diff = ols.beta - sbe.beta_star;
    let degenerate = !(se_h > HAUSMAN_DEGENERATE_RATIO * ols.se);
    let (z, p) = if degenerate {
        (0.0, 1.0)
    } else {
        let z = diff / se_h;
        (z, (2.0 * normal_sf(z.abs())).min(1.0))
    };
    Ok(HausmanReport {
        method: sbe.method,
        beta_ols: ols.beta,
        beta_star: sbe.beta_star,
        diff,
        se_h,
        z,
        p_two_sided: p,
        clustered: clusters.is_some(),
        degenerate,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ResidualTarget {
    /// Outcome on treatment and controls.
    #[serde(rename = "OR")]
    Outcome,
    /// Treatment on controls.
    #[serde(rename = "PR")]
    Propensity,
    /// Outcome on controls.
    #[serde(rename = "RF")]
    ReducedForm,
}

impl ResidualTarget {
    pub fn code(self) -> &'static str {
        match self {
            ResidualTarget::Outcome => "OR",
            ResidualTarget::Propensity => "PR",
            ResidualTarget::ReducedForm => "RF",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualReport {
    pub target: ResidualTarget,
    pub rss_lasso: f64,
    pub rss_ols: f64,
    /// `rss_lasso - rss_ols`
    pub numerator: f64,
    pub bias_term: f64,
    pub var_term: f64,
    pub z: f64,
    pub p_one_sided: f64,
    pub level: f64,
    pub reject: bool,
    pub clustered: bool,
    pub degenerate: bool,
}

/// One-sided test that `||e||^2 - Y'(I - P)Y` exceeds its bias correction
/// `sum_i e_i^2 P_ii` by more than `z_{1-level}` standard deviations.
pub fn residual_test(
    xb: &ProjectionBundle,
    target: ResidualTarget,
    y: &[f64],
    resid: &[f64],
    level: f64,
    clusters: Option<&Clusters>,
) -> Result<ResidualReport> {
    let n = xb.rows();
    if y.len() != n || resid.len() != n {
        return Err(Error::input("residual test: vector lengths do not match the design"));
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::input("level must lie in (0, 1)"));
    }
    let rss_lasso = dot(resid, resid);
    let ols_resid = xb.annihilate(y)?;
    let rss_ols = dot(&ols_resid, &ols_resid);
    if rss_lasso < rss_ols * (1.0 - LOWER_BOUND_SLACK) {
        return Err(Error::LowerBoundViolated { rss_lasso, rss_ols });
    }
    let (bias_term, var_term) = match clusters {
        None => {
            let e2: Vec<f64> = resid.iter().map(|e| e * e).collect();
            let bias = dot(&e2, &xb.leverages());
            (bias, 2.0 * xb.weighted_offdiag_norm(&e2)?)
        }
        Some(c) => {
            c.check_len(n)?;
            clustered_terms(xb, resid, c)
        }
    };
    let numerator = rss_lasso - rss_ols;
    let excess = numerator - bias_term;
    let degenerate = !(var_term > 0.0);
    let (z, p) = if degenerate {
        (0.0, if excess > 0.0 { 0.0 } else { 1.0 })
    } else {
        let z = excess / var_term.sqrt();
        (z, normal_sf(z))
    };
    Ok(ResidualReport {
        target,
        rss_lasso,
        rss_ols,
        numerator,
        bias_term,
        var_term,
        z,
        p_one_sided: p,
        level,
        reject: p < level,
        clustered: clusters.is_some(),
        degenerate,
    })
}

/// With `a_g = sum_{i in g} e_i q_i` (rows `q_i` of the basis), the bias is
/// `sum_g ||a_g||^2` and the variance `2 sum_{g != h} (a_g' a_h)^2`.
fn clustered_terms(xb: &ProjectionBundle, e: &[f64], c: &Clusters) -> (f64, f64) {
    let r = xb.rank();
    let g = c.count();
    let q = xb.basis();
    let mut a = vec![0.0; g * r];
    for k in 0..r {
        let qk = q.column(k);
        for (i, ei) in e.iter().enumerate() {
            a[c.group(i) * r + k] += ei * qk[i];
        }
    }
    let row = |h: usize| &a[h * r..(h + 1) * r];
    let mut bias = 0.0;
    let mut off = 0.0;
    for h in 0..g {
        bias += dot(row(h), row(h));
        for l in (h + 1)..g {
            off += dot(row(h), row(l)).powi(2);
        }
    }
    (bias, 4.0 * off)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatteryConfig {
    pub level: f64,
    pub method: SbeMethod,
    pub include_reduced_form: bool,
    pub double_t_threshold: f64,
    pub lasso: LassoOptions,
}

impl Default for BatteryConfig {
    fn default() -> Self {
        BatteryConfig {
            level: 0.05,
            method: SbeMethod::PostDoubleLasso,
            include_reduced_form: false,
            double_t_threshold: DOUBLE_T_THRESHOLD,
            lasso: LassoOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Battery {
    pub ols: OlsSummary,
    pub sbe: SbeSummary,
    pub hausman: HausmanReport,
    pub residual: Vec<ResidualReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OlsSummary {
    pub beta: f64,
    pub se: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SbeSummary {
    pub method: SbeMethod,
    pub beta: f64,
    pub se: f64,
    pub selected: Vec<usize>,
}

/// Flat serialization of one test's result.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestRecord {
    pub test: String,
    pub target: String,
    pub statistic: f64,
    pub bias_term: Option<f64>,
    pub var_term: f64,
    pub z: f64,
    pub p: f64,
    pub clustered: bool,
    pub degenerate: bool,
}

impl From<&HausmanReport> for TestRecord {
    fn from(h: &HausmanReport) -> Self {
        TestRecord {
            test: "hausman".into(),
            target: h.method.to_string(),
            statistic: h.diff,
            bias_term: None,
            var_term: h.se_h * h.se_h,
            z: h.z,
            p: h.p_two_sided,
            clustered: h.clustered,
            degenerate: h.degenerate,
        }
    }
}

impl From<&ResidualReport> for TestRecord {
    fn from(r: &ResidualReport) -> Self {
        TestRecord {
            test: "residual".into(),
            target: r.target.code().into(),
            statistic: r.numerator,
            bias_term: Some(r.bias_term),
            var_term: r.var_term,
            z: r.z,
            p: r.p_one_sided,
            clustered: r.clustered,
            degenerate: r.degenerate,
        }
    }
}

impl Battery {
    pub fn records(&self) -> Vec<TestRecord> {
        std::iter::once(TestRecord::from(&self.hausman))
            .chain(self.residual.iter().map(TestRecord::from))
            .collect()
    }

    /// Test label (`H`, `OR`, `PR`, `RF`) with its p-value.
    pub fn p_values(&self) -> Vec<(&'static str, f64)> {
        std::iter::once(("H", self.hausman.p_two_sided))
            .chain(self.residual.iter().map(|r| (r.target.code(), r.p_one_sided)))
            .collect()
    }

    pub fn residual(&self, target: ResidualTarget) -> Option<&ResidualReport> {
        self.residual.iter().find(|r| r.target == target)
    }
}

/// Hausman test plus the OR and PR residual tests (and RF when configured).
/// Residual tests use post-lasso residuals.
pub fn run_test_battery(
    y: &[f64],
    d: &[f64],
    controls: &Controls,
    clusters: Option<&Clusters>,
    cfg: &BatteryConfig,
) -> Result<Battery> {
    let ols = controls.ols(y, d, clusters)?;
    let fit_d = plugin_lasso(controls, d, &cfg.lasso)?;
    let fit_y = if cfg.method == SbeMethod::PostDoubleLasso || cfg.include_reduced_form {
        Some(plugin_lasso(controls, y, &cfg.lasso)?)
    } else {
        None
    };
    let sbe = match cfg.method {
        SbeMethod::PostDoubleLasso => {
            post_double_selection_from(y, d, controls, fit_y.as_ref().expect("outcome fit"), &fit_d, clusters)?
        }
        SbeMethod::DoubleT => double_t_selection(y, d, controls, cfg.double_t_threshold, clusters)?,
    };
    let hausman = hausman_test(&ols, &sbe, clusters)?;

    let with_d = controls.with_unpenalized_column("(treatment)", d)?;
    let fit_or = plugin_lasso(&with_d, y, &cfg.lasso)?;
    let mut residual = vec![
        residual_test(
            with_d.bundle(),
            ResidualTarget::Outcome,
            y,
            &fit_or.post_residuals,
            cfg.level,
            clusters,
        )?,
        residual_test(
            controls.bundle(),
            ResidualTarget::Propensity,
            d,
            &fit_d.post_residuals,
            cfg.level,
            clusters,
        )?,
    ];
    if cfg.include_reduced_form {
        let f = fit_y.as_ref().expect("outcome fit");
        residual.push(residual_test(
            controls.bundle(),
            ResidualTarget::ReducedForm,
            y,
            &f.post_residuals,
            cfg.level,
            clusters,
        )?);
    }
    Ok(Battery {
        ols: OlsSummary {
            beta: ols.beta,
            se: ols.se,
        },
        sbe: SbeSummary {
            method: sbe.method,
            beta: sbe.beta_star,
            se: sbe.se_star,
            selected: sbe.selected_union.clone(),
        },
        hausman,
        residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{decompose, DenseMatrix};

    #[test]
    fn ols_residuals_never_reject() {
        let x = DenseMatrix::from_columns(&[vec![1.0; 6], vec![0.0, 1.0, 3.0, 2.0, 5.0, 4.0]]).unwrap();
        let b = decompose(&x).unwrap();
        let y = [1.0, 0.3, 2.0, -1.0, 0.5, 0.9];
        let e = b.annihilate(&y).unwrap();
        let r = residual_test(&b, ResidualTarget::Propensity, &y, &e, 0.05, None).unwrap();
        assert_eq!(r.numerator, 0.0);
        assert!(r.bias_term > 0.0);
        assert!(!r.reject);
    }

    #[test]
    fn too_small_rss_is_an_error() {
        let x = DenseMatrix::from_columns(&[vec![1.0; 4]]).unwrap();
        let b = decompose(&x).unwrap();
        let y = [1.0, 2.0, 3.0, 6.0];
        let r = residual_test(&b, ResidualTarget::Outcome, &y, &[0.0; 4], 0.05, None);
        assert!(matches!(r, Err(Error::LowerBoundViolated { .. })));
    }

    #[test]
    fn singleton_clusters_match_unclustered() {
        let x = DenseMatrix::from_columns(&[vec![1.0; 5], vec![0.2, -1.0, 0.4, 1.5, 0.0]]).unwrap();
        let b = decompose(&x).unwrap();
        let y = [1.0, 0.0, 2.0, 1.0, -1.0];
        let e: Vec<f64> = y.iter().map(|v| v - 0.8).collect();
        let plain = residual_test(&b, ResidualTarget::Outcome, &y, &e, 0.05, None).unwrap();
        let cl = Clusters::from_ids(&[0, 1, 2, 3, 4]);
        let clustered = residual_test(&b, ResidualTarget::Outcome, &y, &e, 0.05, Some(&cl)).unwrap();
        assert!((plain.bias_term - clustered.bias_term).abs() < 1e-12);
        assert!((plain.var_term - clustered.var_term).abs() < 1e-12);
        assert!(clustered.clustered);
    }
}
