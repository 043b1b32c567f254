use serde::{Deserialize, Serialize};

use super::lasso::{lasso_warm, LassoFit, LassoOptions};
use super::ols::{ols_fwl, OlsFit, DEGENERATE_TREATMENT_TOL};
use crate::error::{Error, Result};
use crate::linalg::{decompose, dot, Clusters, DenseMatrix, ProjectionBundle};
use crate::model_spec::DesignMatrix;
use crate::stats::normal_quantile;

/// Smallest penalty loading; smaller values are raised to this and flagged.
pub const LOADING_FLOOR: f64 = 1e-8;

pub const DOUBLE_T_THRESHOLD: f64 = 2.575;

/// A control design with its factorizations, reusable across many outcomes.
#[derive(Debug, Clone)]
pub struct Controls {
    design: DesignMatrix,
    bundle: ProjectionBundle,
    unpenalized: Vec<usize>,
    penalized: Vec<usize>,
    unpen_bundle: ProjectionBundle,
    /// Penalized columns with the unpenalized span projected out.
    partialled: DenseMatrix,
}

impl Controls {
    pub fn new(design: DesignMatrix) -> Result<Self> {
        let n = design.rows();
        let bundle = design.bundle()?;
        if design.cols() >= n || bundle.rank() >= n {
            return Err(Error::Regime {
                rows: n,
                cols: design.cols(),
                rank: bundle.rank(),
            });
        }
        let unpenalized = design.unpenalized();
        let penalized = design.penalized();
        let unpen_bundle = decompose(&design.matrix.select_columns(&unpenalized))?;
        let cols = penalized
            .iter()
            .map(|&j| unpen_bundle.annihilate(design.matrix.column(j)))
            .collect::<Result<Vec<_>>>()?;
        let partialled = if cols.is_empty() {
            DenseMatrix::from_col_major(n, 0, Vec::new())?
        } else {
            DenseMatrix::from_columns(&cols)?
        };
        Ok(Controls {
            design,
            bundle,
            unpenalized,
            penalized,
            unpen_bundle,
            partialled,
        })
    }

    pub fn design(&self) -> &DesignMatrix {
        &self.design
    }

    pub fn bundle(&self) -> &ProjectionBundle {
        &self.bundle
    }

    pub fn rows(&self) -> usize {
        self.design.rows()
    }

    pub fn cols(&self) -> usize {
        self.design.cols()
    }

    pub fn unpenalized(&self) -> &[usize] {
        &self.unpenalized
    }

    pub fn penalized(&self) -> &[usize] {
        &self.penalized
    }

    pub fn ols(&self, y: &[f64], d: &[f64], clusters: Option<&Clusters>) -> Result<OlsFit> {
        ols_fwl(y, d, &self.bundle, clusters)
    }

    /// Least-squares residual of `v` on the unpenalized columns plus `extra`.
    pub fn residual_on(&self, v: &[f64], extra: &[usize]) -> Result<Vec<f64>> {
        if extra.is_empty() {
            return self.unpen_bundle.annihilate(v);
        }
        self.unpen_bundle
            .extend(&self.design.matrix.select_columns(extra))?
            .annihilate(v)
    }

    /// Controls augmented by one extra unpenalized column appended last.
    pub fn with_unpenalized_column(&self, name: &str, col: &[f64]) -> Result<Controls> {
        let n = self.rows();
        if col.len() != n {
            return Err(Error::input("extra column has the wrong length"));
        }
        let extra = DenseMatrix::from_columns(&[col.to_vec()])?;
        let bundle = self.bundle.extend(&extra)?;
        if bundle.rank() >= n {
            return Err(Error::Regime {
                rows: n,
                cols: self.cols() + 1,
                rank: bundle.rank(),
            });
        }
        let unpen_bundle = self.unpen_bundle.extend(&extra)?;
        let mut design = self.design.clone();
        design.matrix = design.matrix.with_column(col)?;
        design.provenance.push(crate::model_spec::ColumnProvenance {
            source: name.to_string(),
            transform: "raw".into(),
            categories: None,
            unpenalized: true,
        });
        let mut unpenalized = self.unpenalized.clone();
        let new_index = self.cols();
        unpenalized.push(new_index);
        // The new direction is the extra column's residual on the old
        // unpenalized span; removing it from each partialled column suffices.
        let cols = if unpen_bundle.rank() > self.unpen_bundle.rank() {
            let q = unpen_bundle.basis().column(unpen_bundle.rank() - 1).to_vec();
            self.partialled
                .columns()
                .map(|c| {
                    let mut v = c.to_vec();
                    crate::linalg::axpy(-dot(&q, c), &q, &mut v);
                    v
                })
                .collect::<Vec<_>>()
        } else {
            self.partialled.columns().map(<[f64]>::to_vec).collect()
        };
        let partialled = if cols.is_empty() {
            DenseMatrix::from_col_major(n, 0, Vec::new())?
        } else {
            DenseMatrix::from_columns(&cols)?
        };
        Ok(Controls {
            design,
            bundle,
            unpenalized,
            penalized: self.penalized.clone(),
            unpen_bundle,
            partialled,
        })
    }

    fn sorted_with_unpenalized(&self, selected: &[usize]) -> Vec<usize> {
        let mut cols: Vec<usize> = self.unpenalized.iter().chain(selected).copied().collect();
        cols.sort_unstable();
        cols.dedup();
        cols
    }
}

/// `lambda = 2 c sqrt(n) Phi^{-1}(1 - gamma / (2p))` with `c = 1.1` and
/// `gamma = 0.1 / ln(max(p, n))`.
pub fn plugin_lambda(n: usize, p: usize) -> f64 {
    let gamma = 0.1 / (p.max(n) as f64).ln();
    2.0 * 1.1 * (n as f64).sqrt() * normal_quantile(1.0 - gamma / (2.0 * p as f64))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PenaltyChoice {
    pub lambda: f64,
    pub loadings: Vec<f64>,
    pub degenerate: bool,
}

/// Plug-in penalty level and loadings `sqrt(mean_i x_ij^2 e_i^2)` for each
/// column of `x`, given a residual proxy `e`.
pub fn plugin_penalty(n: usize, p: usize, residual_proxy: &[f64], x: &DenseMatrix) -> Result<PenaltyChoice> {
    if p == 0 {
        return Err(Error::input("plug-in penalty needs at least one penalized column"));
    }
    if residual_proxy.len() != x.rows() {
        return Err(Error::input("residual proxy length does not match design rows"));
    }
    let e2: Vec<f64> = residual_proxy.iter().map(|e| e * e).collect();
    let mut degenerate = false;
    let loadings = x
        .columns()
        .map(|c| {
            let m: f64 = c.iter().zip(&e2).map(|(xi, ei)| xi * xi * ei).sum::<f64>() / x.rows() as f64;
            let g = m.sqrt();
            if g < LOADING_FLOOR {
                degenerate = true;
                LOADING_FLOOR
            } else {
                g
            }
        })
        .collect();
    Ok(PenaltyChoice {
        lambda: plugin_lambda(n, p),
        loadings,
        degenerate,
    })
}

/// Lasso with plug-in penalty followed by a least-squares refit on the
/// selected columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PluginFit {
    /// Coefficients and loadings indexed by design column.
    pub lasso: LassoFit,
    /// Design columns (penalized only) with nonzero lasso coefficients.
    pub selected: Vec<usize>,
    pub post_residuals: Vec<f64>,
    pub plugin_lambda: f64,
}

/// Number of loading iterations: the first from the residual on the
/// unpenalized columns, the second from the first lasso fit's residuals.
pub const LOADING_ITERATIONS: usize = 2;

pub fn plugin_lasso(controls: &Controls, y: &[f64], opts: &LassoOptions) -> Result<PluginFit> {
    let n = controls.rows();
    if y.len() != n {
        return Err(Error::input("response length does not match design rows"));
    }
    let p = controls.penalized.len();
    let y_t = controls.unpen_bundle.annihilate(y)?;
    let x_t = &controls.partialled;

    let (fit, lambda_plugin, degenerate) = if p == 0 {
        (lasso_warm(x_t, &y_t, 0.0, &[], opts, None)?, 0.0, false)
    } else {
        let mut proxy = y_t.clone();
        let mut degenerate = false;
        let mut fit: Option<LassoFit> = None;
        let mut lambda_plugin = 0.0;
        for _ in 0..LOADING_ITERATIONS {
            let pen = plugin_penalty(n, p, &proxy, x_t)?;
            degenerate |= pen.degenerate;
            lambda_plugin = pen.lambda;
            // 0.5 ||.||^2 objective, so the plug-in level is halved.
            let warm = fit.as_ref().map(|f| f.alpha_hat.clone());
            let f = lasso_warm(x_t, &y_t, pen.lambda / 2.0, &pen.loadings, opts, warm.as_deref())?;
            proxy = f.residuals.clone();
            fit = Some(f);
        }
        (fit.expect("at least one iteration"), lambda_plugin, degenerate)
    };

    if !fit.converged {
        return Err(Error::Numerical(format!(
            "lasso did not converge in {} sweeps",
            fit.iterations
        )));
    }

    // Map back to design coordinates, recovering unpenalized coefficients.
    let k = controls.cols();
    let mut alpha = vec![0.0; k];
    let mut loadings = vec![0.0; k];
    let mut partial = y.to_vec();
    for (pos, &j) in controls.penalized.iter().enumerate() {
        alpha[j] = fit.alpha_hat[pos];
        loadings[j] = fit.loadings[pos];
        if alpha[j] != 0.0 {
            crate::linalg::axpy(-alpha[j], controls.design.matrix.column(j), &mut partial);
        }
    }
    let coefs = controls.unpen_bundle.coefficients(&partial)?;
    for (pos, &kept) in controls.unpen_bundle.kept().iter().enumerate() {
        alpha[controls.unpenalized[kept]] = coefs[pos];
    }
    let selected: Vec<usize> = fit.selected.iter().map(|&pos| controls.penalized[pos]).collect();
    let post_residuals = controls.residual_on(y, &selected)?;
    Ok(PluginFit {
        lasso: LassoFit {
            alpha_hat: alpha,
            selected: selected.clone(),
            loadings,
            degenerate,
            ..fit
        },
        selected,
        post_residuals,
        plugin_lambda: lambda_plugin,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SbeMethod {
    PostDoubleLasso,
    DoubleT,
}

impl std::fmt::Display for SbeMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SbeMethod::PostDoubleLasso => "post_double_lasso",
            SbeMethod::DoubleT => "double_t",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SbeFit {
    pub method: SbeMethod,
    pub beta_star: f64,
    pub se_star: f64,
    /// Penalized design columns kept by either selection step.
    pub selected_union: Vec<usize>,
    pub selected_outcome: Vec<usize>,
    pub selected_propensity: Vec<usize>,
    /// Residuals of `Y - D beta_star` on the kept columns.
    pub u_hat_sbe: Vec<f64>,
    /// Residuals of `D` on the columns kept in the propensity step.
    pub d_hat: Vec<f64>,
    pub degenerate: bool,
}

fn check_treatment(controls: &Controls, d: &[f64]) -> Result<()> {
    let dd = controls.bundle.annihilate(d)?;
    let r = dot(&dd, &dd);
    if r <= DEGENERATE_TREATMENT_TOL * dot(d, d) || r == 0.0 {
        return Err(Error::DegenerateTreatment);
    }
    Ok(())
}

fn union(a: &[usize], b: &[usize]) -> Vec<usize> {
    let mut u: Vec<usize> = a.iter().chain(b).copied().collect();
    u.sort_unstable();
    u.dedup();
    u
}

#[allow(clippy::too_many_arguments)]
fn second_stage(
    controls: &Controls,
    method: SbeMethod,
    y: &[f64],
    d: &[f64],
    sel_y: Vec<usize>,
    sel_d: Vec<usize>,
    clusters: Option<&Clusters>,
    degenerate: bool,
) -> Result<SbeFit> {
    let n = controls.rows();
    let selected_union = union(&sel_y, &sel_d);
    let cols = controls.sorted_with_unpenalized(&selected_union);
    if cols.len() >= n - 1 {
        return Err(Error::SelectionOverflow {
            selected: cols.len(),
            rows: n,
        });
    }
    let bundle = decompose(&controls.design.matrix.select_columns(&cols))?;
    let fit = ols_fwl(y, d, &bundle, clusters)?;
    let d_hat = controls.residual_on(d, &sel_d)?;
    Ok(SbeFit {
        method,
        beta_star: fit.beta,
        se_star: fit.se,
        selected_union,
        selected_outcome: sel_y,
        selected_propensity: sel_d,
        u_hat_sbe: fit.u_hat,
        d_hat,
        degenerate,
    })
}

pub fn post_double_selection(
    y: &[f64],
    d: &[f64],
    controls: &Controls,
    clusters: Option<&Clusters>,
    opts: &LassoOptions,
) -> Result<SbeFit> {
    check_treatment(controls, d)?;
    let fd = plugin_lasso(controls, d, opts)?;
    let fy = plugin_lasso(controls, y, opts)?;
    post_double_selection_from(y, d, controls, &fy, &fd, clusters)
}

/// Second stage of post-double selection given the two first-stage fits.
pub fn post_double_selection_from(
    y: &[f64],
    d: &[f64],
    controls: &Controls,
    outcome_fit: &PluginFit,
    propensity_fit: &PluginFit,
    clusters: Option<&Clusters>,
) -> Result<SbeFit> {
    check_treatment(controls, d)?;
    let degenerate = outcome_fit.lasso.degenerate || propensity_fit.lasso.degenerate;
    let mut fit = second_stage(
        controls,
        SbeMethod::PostDoubleLasso,
        y,
        d,
        outcome_fit.selected.clone(),
        propensity_fit.selected.clone(),
        clusters,
        degenerate,
    )?;
    fit.d_hat = propensity_fit.post_residuals.clone();
    Ok(fit)
}

/// Penalized columns whose robust (or clustered) t-statistic in the
/// least-squares regression of `v` on all controls exceeds `threshold`.
pub fn t_screen(controls: &Controls, v: &[f64], threshold: f64, clusters: Option<&Clusters>) -> Result<Vec<usize>> {
    let b = &controls.bundle;
    let coefs = b.coefficients(v)?;
    let resid = b.annihilate(v)?;
    let se = b.sandwich_se(&resid, clusters)?;
    let mut kept = Vec::new();
    for (pos, &j) in b.kept().iter().enumerate() {
        if controls.unpenalized.contains(&j) {
            continue;
        }
        let t = if se[pos] > 0.0 {
            coefs[pos] / se[pos]
        } else if coefs[pos] != 0.0 {
            f64::INFINITY
        } else {
            0.0
        };
        if t.abs() > threshold {
            kept.push(j);
        }
    }
    Ok(kept)
}

pub fn double_t_selection(
    y: &[f64],
    d: &[f64],
    controls: &Controls,
    threshold: f64,
    clusters: Option<&Clusters>,
) -> Result<SbeFit> {
    if !(threshold >= 0.0) {
        return Err(Error::input("double-t threshold must be nonnegative"));
    }
    if let Some(c) = clusters {
        c.check_len(controls.rows())?;
    }
    check_treatment(controls, d)?;
    let sel_y = t_screen(controls, y, threshold, clusters)?;
    let sel_d = t_screen(controls, d, threshold, clusters)?;
    second_stage(controls, SbeMethod::DoubleT, y, d, sel_y, sel_d, clusters, false)
}
