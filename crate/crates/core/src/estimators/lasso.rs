use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{axpy, dot, norm2, DenseMatrix};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LassoOptions {
    /// Convergence threshold on `max_j |delta alpha_j| * ||x_j|| / ||y||`.
    pub tol: f64,
    /// Maximum number of coordinate sweeps.
    pub max_iter: usize,
    /// KKT slack, relative to `lambda`, required before declaring convergence.
    pub kkt_tol: f64,
}

impl Default for LassoOptions {
    fn default() -> Self {
        LassoOptions {
            tol: 1e-8,
            max_iter: 100_000,
            kkt_tol: 1e-7,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LassoFit {
    pub alpha_hat: Vec<f64>,
    /// Penalized columns with nonzero coefficients.
    pub selected: Vec<usize>,
    pub residuals: Vec<f64>,
    pub lambda: f64,
    pub loadings: Vec<f64>,
    pub objective_value: f64,
    /// Objective after each sweep, starting from the initial point.
    pub objective_trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// Set when a penalty loading had to be raised to its guard value.
    pub degenerate: bool,
}

impl LassoFit {
    /// Largest KKT violation divided by `lambda` (or absolute when `lambda = 0`).
    pub fn kkt_violation(&self, x: &DenseMatrix) -> f64 {
        let v = kkt_max_violation(x, &self.residuals, &self.alpha_hat, self.lambda, &self.loadings);
        if self.lambda > 0.0 {
            v / self.lambda
        } else {
            v
        }
    }
}

fn soft_threshold(z: f64, t: f64) -> f64 {
    if z > t {
        z - t
    } else if z < -t {
        z + t
    } else {
        0.0
    }
}

fn objective(resid: &[f64], alpha: &[f64], lambda: f64, loadings: &[f64]) -> f64 {
    let pen: f64 = alpha.iter().zip(loadings).map(|(a, g)| g * a.abs()).sum();
    0.5 * dot(resid, resid) + lambda * pen
}

fn kkt_max_violation(x: &DenseMatrix, resid: &[f64], alpha: &[f64], lambda: f64, loadings: &[f64]) -> f64 {
    (0..x.cols())
        .map(|j| {
            let g = dot(x.column(j), resid);
            let pen = lambda * loadings[j];
            if alpha[j] != 0.0 {
                (g - pen * alpha[j].signum()).abs()
            } else {
                (g.abs() - pen).max(0.0)
            }
        })
        .fold(0.0, f64::max)
}

fn validate(x: &DenseMatrix, y: &[f64], lambda: f64, loadings: &[f64]) -> Result<()> {
    if y.len() != x.rows() {
        return Err(Error::input("lasso: response length does not match design rows"));
    }
    if loadings.len() != x.cols() {
        return Err(Error::input("lasso: one loading per column is required"));
    }
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(Error::input("lasso: lambda must be finite and nonnegative"));
    }
    if loadings.iter().any(|g| !(*g >= 0.0) || !g.is_finite()) {
        return Err(Error::input("lasso: loadings must be finite and nonnegative"));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::input("lasso: response has non-finite entries"));
    }
    Ok(())
}

/// Minimizes `0.5 ||y - X a||^2 + lambda * sum_j loadings_j |a_j|` by cyclic
/// coordinate descent. Columns with loading 0 are unpenalized.
pub fn lasso(x: &DenseMatrix, y: &[f64], lambda: f64, loadings: &[f64], opts: &LassoOptions) -> Result<LassoFit> {
    lasso_warm(x, y, lambda, loadings, opts, None)
}

/// As [`lasso`], starting from `init` when given.
pub fn lasso_warm(
    x: &DenseMatrix,
    y: &[f64],
    lambda: f64,
    loadings: &[f64],
    opts: &LassoOptions,
    init: Option<&[f64]>,
) -> Result<LassoFit> {
    validate(x, y, lambda, loadings)?;
    let p = x.cols();
    let col_sq: Vec<f64> = x.columns().map(|c| dot(c, c)).collect();
    let col_norm: Vec<f64> = col_sq.iter().map(|v| v.sqrt()).collect();
    let y_norm = norm2(y).max(f64::MIN_POSITIVE);

    let mut alpha = vec![0.0; p];
    let mut resid = y.to_vec();
    if let Some(a0) = init {
        if a0.len() != p {
            return Err(Error::input("lasso: warm start has the wrong length"));
        }
        for j in 0..p {
            if a0[j] != 0.0 && col_sq[j] > 0.0 {
                alpha[j] = a0[j];
                axpy(-a0[j], x.column(j), &mut resid);
            }
        }
    }
    let y_scale = y_norm * col_norm.iter().copied().fold(0.0, f64::max);
    let kkt_slack = (opts.kkt_tol * lambda).max(1e-13 * y_scale);

    let mut trace = vec![objective(&resid, &alpha, lambda, loadings)];
    let mut iterations = 0;
    let mut converged = false;

    let sweep = |alpha: &mut [f64], resid: &mut [f64], only_active: bool| -> f64 {
        let mut max_change: f64 = 0.0;
        for j in 0..p {
            if col_sq[j] == 0.0 || (only_active && alpha[j] == 0.0) {
                continue;
            }
            let xj = x.column(j);
            let old = alpha[j];
            let rho = dot(xj, resid) + col_sq[j] * old;
            let new = soft_threshold(rho, lambda * loadings[j]) / col_sq[j];
            if new != old {
                axpy(old - new, xj, resid);
                alpha[j] = new;
                max_change = max_change.max((new - old).abs() * col_norm[j] / y_norm);
            }
        }
        max_change
    };

    // Full sweeps alternate with inner passes over the active set, which is
    // where nearly all of the work concentrates once the support settles.
    'outer: while iterations < opts.max_iter {
        let change = sweep(&mut alpha, &mut resid, false);
        iterations += 1;
        trace.push(objective(&resid, &alpha, lambda, loadings));
        if change < opts.tol {
            if kkt_max_violation(x, &resid, &alpha, lambda, loadings) <= kkt_slack {
                converged = true;
                break;
            }
            continue;
        }
        while iterations < opts.max_iter {
            let change = sweep(&mut alpha, &mut resid, true);
            iterations += 1;
            trace.push(objective(&resid, &alpha, lambda, loadings));
            if change < opts.tol {
                continue 'outer;
            }
        }
    }

    // Recompute the residual from scratch so it matches alpha exactly.
    let mut fresh = y.to_vec();
    for j in 0..p {
        if alpha[j] != 0.0 {
            axpy(-alpha[j], x.column(j), &mut fresh);
        }
    }
    let selected = (0..p).filter(|&j| alpha[j] != 0.0 && loadings[j] > 0.0).collect();
    let objective_value = objective(&fresh, &alpha, lambda, loadings);
    Ok(LassoFit {
        alpha_hat: alpha,
        selected,
        residuals: fresh,
        lambda,
        loadings: loadings.to_vec(),
        objective_value,
        objective_trace: trace,
        iterations,
        converged,
        degenerate: false,
    })
}
