use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{dot, Clusters, ProjectionBundle};

/// Treatment coefficient from the regression of `Y` on `D` and the controls,
/// computed by partialling the controls out of `D`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OlsFit {
    pub beta: f64,
    pub se: f64,
    /// `(I - P) Y - beta * d_ddot`
    pub u_hat: Vec<f64>,
    /// `(I - P) D`
    pub d_ddot: Vec<f64>,
    pub cluster_ids: Option<Vec<usize>>,
    pub rank_used: usize,
}

impl OlsFit {
    pub fn clustered(&self) -> bool {
        self.cluster_ids.is_some()
    }

    pub fn n(&self) -> usize {
        self.u_hat.len()
    }

    pub fn d_ddot_sq(&self) -> f64 {
        dot(&self.d_ddot, &self.d_ddot)
    }
}

/// Relative squared norm below which the treatment counts as lying in the
/// span of the controls.
pub const DEGENERATE_TREATMENT_TOL: f64 = 1e-12;

pub fn ols_fwl(y: &[f64], d: &[f64], wb: &ProjectionBundle, clusters: Option<&Clusters>) -> Result<OlsFit> {
    let n = wb.rows();
    if y.len() != n || d.len() != n {
        return Err(Error::input(format!(
            "outcome and treatment must have length {n} (got {} and {})",
            y.len(),
            d.len()
        )));
    }
    if wb.rank() >= n {
        return Err(Error::Regime {
            rows: n,
            cols: wb.source_cols(),
            rank: wb.rank(),
        });
    }
    if let Some(c) = clusters {
        c.check_len(n)?;
    }
    let d_ddot = wb.annihilate(d)?;
    let dd = dot(&d_ddot, &d_ddot);
    if dd <= DEGENERATE_TREATMENT_TOL * dot(d, d) || dd == 0.0 {
        return Err(Error::DegenerateTreatment);
    }
    let y_ddot = wb.annihilate(y)?;
    let beta = dot(&d_ddot, y) / dd;
    let u_hat: Vec<f64> = y_ddot.iter().zip(&d_ddot).map(|(yi, di)| yi - beta * di).collect();
    let score: Vec<f64> = d_ddot.iter().zip(&u_hat).map(|(di, ui)| di * ui).collect();
    let meat = match clusters {
        None => dot(&score, &score),
        Some(c) => c.block_sum_sq(&score),
    };
    Ok(OlsFit {
        beta,
        se: meat.sqrt() / dd,
        u_hat,
        d_ddot,
        cluster_ids: clusters.map(|c| c.groups().to_vec()),
        rank_used: wb.rank(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{decompose, DenseMatrix};

    #[test]
    fn intercept_only_is_difference_in_means() {
        let w = DenseMatrix::from_fn(6, 1, |_, _| 1.0);
        let b = decompose(&w).unwrap();
        let d = [1.0, 0.0, 1.0, 0.0, 1.0, 0.0];
        let y = [3.0, 1.0, 5.0, 2.0, 4.0, 0.0];
        let fit = ols_fwl(&y, &d, &b, None).unwrap();
        assert!((fit.beta - 3.0).abs() < 1e-12);
    }

    #[test]
    fn exact_fit_has_zero_se() {
        let w = DenseMatrix::from_columns(&[vec![1.0; 5], vec![0.0, 1.0, 4.0, 2.0, -1.0]]).unwrap();
        let b = decompose(&w).unwrap();
        let d = [0.3, -1.0, 2.0, 0.5, 1.5];
        let y: Vec<f64> = (0..5).map(|i| 2.0 * d[i] + 1.0 - 0.5 * w.get(i, 1)).collect();
        let fit = ols_fwl(&y, &d, &b, None).unwrap();
        assert!((fit.beta - 2.0).abs() < 1e-10);
        assert!(fit.se.abs() < 1e-10);
    }

    #[test]
    fn treatment_in_span_is_rejected() {
        let w = DenseMatrix::from_columns(&[vec![1.0; 4], vec![1.0, 2.0, 3.0, 4.0]]).unwrap();
        let b = decompose(&w).unwrap();
        let d = [3.0, 5.0, 7.0, 9.0];
        assert!(matches!(ols_fwl(&[1.0; 4], &d, &b, None), Err(Error::DegenerateTreatment)));
    }

    #[test]
    fn saturated_controls_are_a_regime_error() {
        let b = decompose(&DenseMatrix::identity(3)).unwrap();
        let r = ols_fwl(&[1.0, 2.0, 3.0], &[0.0, 1.0, 0.0], &b, None);
        assert!(matches!(r, Err(Error::Regime { .. })));
    }

    #[test]
    fn singleton_clusters_match_robust() {
        let w = DenseMatrix::from_columns(&[vec![1.0; 6]]).unwrap();
        let b = decompose(&w).unwrap();
        let d = [1.0, 0.2, -0.4, 2.0, 0.0, 1.1];
        let y = [0.5, 1.0, -2.0, 0.3, 0.7, -0.1];
        let robust = ols_fwl(&y, &d, &b, None).unwrap();
        let cl = Clusters::from_ids(&[0, 1, 2, 3, 4, 5]);
        let clustered = ols_fwl(&y, &d, &b, Some(&cl)).unwrap();
        assert!((robust.se - clustered.se).abs() < 1e-14);
        assert!(clustered.clustered());
    }
}
