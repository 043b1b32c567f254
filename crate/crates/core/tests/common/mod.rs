#![allow(dead_code)]

pub mod oracles;

use nalgebra::{DMatrix, DVector};
use rand::Rng as _;
use sparsity_audit::linalg::DenseMatrix;
use sparsity_audit::rng::{gaussian_vec, rng_for, Rng};

pub fn rng(seed: u64) -> Rng {
    rng_for(seed, 0)
}

pub fn gaussian_matrix(rng: &mut Rng, n: usize, k: usize) -> DenseMatrix {
    DenseMatrix::from_col_major(n, k, gaussian_vec(rng, n * k)).unwrap()
}

pub fn with_intercept(w: &DenseMatrix) -> DenseMatrix {
    let ones = DenseMatrix::from_columns(&[vec![1.0; w.rows()]]).unwrap();
    ones.hstack(w).unwrap()
}

pub fn to_na(m: &DenseMatrix) -> DMatrix<f64> {
    DMatrix::from_column_slice(m.rows(), m.cols(), m.as_col_major())
}

pub fn vec_na(v: &[f64]) -> DVector<f64> {
    DVector::from_column_slice(v)
}

/// `X (X'X)^{-1} X'` formed explicitly.
pub fn hat_matrix(x: &DMatrix<f64>) -> DMatrix<f64> {
    let xtx_inv = (x.transpose() * x).try_inverse().expect("full column rank");
    x * xtx_inv * x.transpose()
}

/// Normal-equation coefficients `(X'X)^{-1} X'y`.
pub fn normal_equations(x: &DMatrix<f64>, y: &DVector<f64>) -> DVector<f64> {
    let xtx = x.transpose() * x;
    xtx.cholesky().expect("positive definite").solve(&(x.transpose() * y))
}

/// HC0 or cluster-robust sandwich covariance from explicit matrices.
pub fn sandwich_cov(x: &DMatrix<f64>, e: &DVector<f64>, groups: Option<&[usize]>) -> DMatrix<f64> {
    let k = x.ncols();
    let bread = (x.transpose() * x).try_inverse().unwrap();
    let mut meat = DMatrix::zeros(k, k);
    match groups {
        None => {
            for i in 0..x.nrows() {
                let xi = x.row(i).transpose();
                meat += &xi * xi.transpose() * e[i] * e[i];
            }
        }
        Some(g) => {
            let ng = g.iter().max().unwrap() + 1;
            let mut sums = vec![DVector::zeros(k); ng];
            for i in 0..x.nrows() {
                sums[g[i]] += x.row(i).transpose() * e[i];
            }
            for s in &sums {
                meat += s * s.transpose();
            }
        }
    }
    &bread * meat * &bread
}

pub fn uniform(rng: &mut Rng, lo: f64, hi: f64) -> f64 {
    rng.random_range(lo..hi)
}

pub fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}

/// Outcome, treatment, two continuous controls and a six-level category.
pub fn mixed_table(n: usize, seed: u64) -> sparsity_audit::model_spec::DataTable {
    let mut r = rng_for(seed, 0);
    let x = gaussian_vec(&mut r, n);
    let z = gaussian_vec(&mut r, n);
    let g: Vec<usize> = (0..n).map(|i| (i * 13 + 5) % 6).collect();
    let d: Vec<f64> = gaussian_vec(&mut r, n).iter().enumerate().map(|(i, e)| e + 0.5 * x[i] + 0.3 * (g[i] == 2) as u8 as f64).collect();
    let y: Vec<f64> = gaussian_vec(&mut r, n).iter().enumerate().map(|(i, e)| e + 0.5 * d[i] + x[i] * x[i] * 0.3 + z[i]).collect();
    let text = |v: &[f64]| v.iter().map(|t| format!("{t:?}")).collect::<Vec<_>>();
    sparsity_audit::model_spec::DataTable::new(
        ["y", "d", "x", "z", "g"].iter().map(|s| s.to_string()).collect(),
        vec![text(&y), text(&d), text(&x), text(&z), g.iter().map(|v| format!("k{v}")).collect()],
    )
    .unwrap()
}
