//! Scaled Hermite polynomials, orthonormal under the standard Gaussian.

use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;

/// `H_0(x), ..., H_degree(x)` via
/// `H_{j+1}(x) = (x H_j(x) - sqrt(j) H_{j-1}(x)) / sqrt(j + 1)`.
pub fn hermite_values(x: f64, degree: usize) -> Vec<f64> {
    let mut h = Vec::with_capacity(degree + 1);
    h.push(1.0);
    if degree >= 1 {
        h.push(x);
    }
    for j in 1..degree {
        let jf = j as f64;
        let next = (x * h[j] - jf.sqrt() * h[j - 1]) / (jf + 1.0).sqrt();
        h.push(next);
    }
    h
}

pub fn hermite(j: usize, x: f64) -> f64 {
    hermite_values(x, j)[j]
}

/// Columns `H_1(z_i - offset), ..., H_degree(z_i - offset)`.
pub fn hermite_basis(z: &[f64], degree: usize, offset: f64) -> Result<DenseMatrix> {
    if degree == 0 {
        return Err(Error::input("hermite degree must be at least 1"));
    }
    if !offset.is_finite() {
        return Err(Error::input("hermite offset must be finite"));
    }
    if z.is_empty() {
        return Err(Error::input("hermite basis of an empty vector"));
    }
    let n = z.len();
    let mut data = vec![0.0; n * degree];
    for (i, &zi) in z.iter().enumerate() {
        let h = hermite_values(zi - offset, degree);
        for j in 1..=degree {
            data[(j - 1) * n + i] = h[j];
        }
    }
    DenseMatrix::from_col_major(n, degree, data)
}
