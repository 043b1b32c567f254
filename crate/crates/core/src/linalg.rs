//! Dense linear algebra kernel.
//!
//! Matrices are stored column-major. The central object is the
//! [`ProjectionBundle`], a greedy rank-revealing orthogonalization of a
//! set of columns that backs every projection `P = W W^+` used by the
//! estimators and the sparsity tests. `P` itself is never formed.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default relative residual-norm threshold below which a column is
/// treated as collinear with the columns admitted before it.
pub const DEFAULT_RANK_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    /// Builds a matrix from column-major data.
    pub fn from_col_major(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 {
            return Err(Error::input("matrix must have at least one row"));
        }
        if data.len() != rows * cols {
            return Err(Error::input(format!(
                "expected {} entries for a {rows}x{cols} matrix, got {}",
                rows * cols,
                data.len()
            )));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::input(format!(
                "non-finite entry at row {}, column {}",
                pos % rows,
                pos / rows
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_columns(columns: &[Vec<f64>]) -> Result<Self> {
        let rows = columns.first().map(Vec::len).unwrap_or(0);
        if columns.iter().any(|c| c.len() != rows) {
            return Err(Error::input("columns have unequal lengths"));
        }
        let data = columns.iter().flat_map(|c| c.iter().copied()).collect();
        Self::from_col_major(rows, columns.len(), data)
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let p = rows.first().map(Vec::len).unwrap_or(0);
        if rows.iter().any(|r| r.len() != p) {
            return Err(Error::input("rows have unequal lengths"));
        }
        let mut data = vec![0.0; n * p];
        for (i, row) in rows.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                data[j * n + i] = *v;
            }
        }
        Self::from_col_major(n, p, data)
    }

    /// Builds a matrix from a generator; panics if the generator yields a non-finite value.
    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for j in 0..cols {
            for i in 0..rows {
                data.push(f(i, j));
            }
        }
        Self::from_col_major(rows, cols, data).expect("generator produced an invalid matrix")
    }

    pub fn identity(n: usize) -> Self {
        Self::from_fn(n, n, |i, j| if i == j { 1.0 } else { 0.0 })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[j * self.rows + i]
    }

    pub fn column(&self, j: usize) -> &[f64] {
        &self.data[j * self.rows..(j + 1) * self.rows]
    }

    pub fn columns(&self) -> impl Iterator<Item = &[f64]> {
        (0..self.cols).map(move |j| self.column(j))
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        (0..self.cols).map(|j| self.get(i, j)).collect()
    }

    pub fn as_col_major(&self) -> &[f64] {
        &self.data
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.rows).map(|i| self.row(i)).collect()
    }

    /// Submatrix with the given columns, in the given order.
    pub fn select_columns(&self, idx: &[usize]) -> DenseMatrix {
        let mut data = Vec::with_capacity(self.rows * idx.len());
        for &j in idx {
            data.extend_from_slice(self.column(j));
        }
        DenseMatrix {
            rows: self.rows,
            cols: idx.len(),
            data,
        }
    }

    /// Appends columns on the right.
    pub fn hstack(&self, other: &DenseMatrix) -> Result<DenseMatrix> {
        if other.rows != self.rows {
            return Err(Error::input("hstack: row counts differ"));
        }
        let mut data = self.data.clone();
        data.extend_from_slice(&other.data);
        Ok(DenseMatrix {
            rows: self.rows,
            cols: self.cols + other.cols,
            data,
        })
    }

    pub fn with_column(&self, col: &[f64]) -> Result<DenseMatrix> {
        if col.len() != self.rows {
            return Err(Error::input("appended column has the wrong length"));
        }
        if col.iter().any(|v| !v.is_finite()) {
            return Err(Error::input("appended column has non-finite entries"));
        }
        let mut data = self.data.clone();
        data.extend_from_slice(col);
        Ok(DenseMatrix {
            rows: self.rows,
            cols: self.cols + 1,
            data,
        })
    }

    /// `X b`
    pub fn mul_vec(&self, b: &[f64]) -> Vec<f64> {
        assert_eq!(b.len(), self.cols);
        let mut out = vec![0.0; self.rows];
        for (j, &bj) in b.iter().enumerate() {
            if bj != 0.0 {
                axpy(bj, self.column(j), &mut out);
            }
        }
        out
    }

    /// `X' v`
    pub fn tr_mul_vec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.rows);
        self.columns().map(|c| dot(c, v)).collect()
    }

    /// `X Y` for conformable matrices.
    pub fn matmul(&self, other: &DenseMatrix) -> Result<DenseMatrix> {
        if self.cols != other.rows {
            return Err(Error::input("matmul: inner dimensions differ"));
        }
        let mut data = Vec::with_capacity(self.rows * other.cols);
        for j in 0..other.cols {
            data.extend(self.mul_vec(other.column(j)));
        }
        Ok(DenseMatrix {
            rows: self.rows,
            cols: other.cols,
            data,
        })
    }

    pub fn transpose(&self) -> DenseMatrix {
        DenseMatrix::from_fn(self.cols, self.rows, |i, j| self.get(j, i))
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    // four accumulators; keeps the summation order fixed for reproducibility
    let mut acc = [0.0f64; 4];
    let chunks = a.len() / 4;
    for k in 0..chunks {
        let i = 4 * k;
        acc[0] += a[i] * b[i];
        acc[1] += a[i + 1] * b[i + 1];
        acc[2] += a[i + 2] * b[i + 2];
        acc[3] += a[i + 3] * b[i + 3];
    }
    let mut tail = 0.0;
    for i in 4 * chunks..a.len() {
        tail += a[i] * b[i];
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

#[inline]
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

pub fn norm2(v: &[f64]) -> f64 {
    dot(v, v).sqrt()
}

/// Orthonormal basis for the span of a column set, with the bookkeeping
/// of which input columns were admitted.
///
/// Columns are admitted greedily in their given order. Immutable once built.
#[derive(Debug, Clone)]
pub struct ProjectionBundle {
    basis: DenseMatrix,
    /// Upper-triangular `r x r` factor (column-major) with `X[:, kept] = Q R`.
    r_factor: Vec<f64>,
    kept: Vec<usize>,
    dropped: Vec<usize>,
    source_cols: usize,
    tolerance: f64,
}

impl ProjectionBundle {
    pub fn basis(&self) -> &DenseMatrix {
        &self.basis
    }

    pub fn kept(&self) -> &[usize] {
        &self.kept
    }

    pub fn dropped(&self) -> &[usize] {
        &self.dropped
    }

    pub fn rank(&self) -> usize {
        self.kept.len()
    }

    pub fn rows(&self) -> usize {
        self.basis.rows
    }

    pub fn source_cols(&self) -> usize {
        self.source_cols
    }

    pub fn tolerance(&self) -> f64 {
        self.tolerance
    }

    fn q(&self, k: usize) -> &[f64] {
        self.basis.column(k)
    }

    fn r_at(&self, i: usize, j: usize) -> f64 {
        self.r_factor[j * self.rank() + i]
    }

    /// Returns a bundle whose source columns are this bundle's, followed by `extra`.
    ///
    /// The existing basis is reused; only the new columns are orthogonalized.
    pub fn extend(&self, extra: &DenseMatrix) -> Result<ProjectionBundle> {
        if extra.rows() != self.rows() {
            return Err(Error::input("extend: row counts differ"));
        }
        let mut builder = Builder {
            n: self.rows(),
            tol: self.tolerance,
            q: self.basis.data.clone(),
            r_cols: (0..self.rank())
                .map(|j| (0..=j).map(|i| self.r_at(i, j)).collect())
                .collect(),
            kept: self.kept.clone(),
            dropped: self.dropped.clone(),
        };
        for j in 0..extra.cols() {
            builder.admit(self.source_cols + j, extra.column(j));
        }
        Ok(builder.finish(self.source_cols + extra.cols()))
    }

    /// `Q' v`
    pub fn coordinates(&self, v: &[f64]) -> Vec<f64> {
        self.basis.tr_mul_vec(v)
    }

    /// `(I - P) v`
    pub fn annihilate(&self, v: &[f64]) -> Result<Vec<f64>> {
        self.check_len(v)?;
        let mut out = v.to_vec();
        // two passes keep the result orthogonal to the basis at roughly machine precision
        for _ in 0..2 {
            for k in 0..self.rank() {
                let c = dot(self.q(k), &out);
                axpy(-c, self.q(k), &mut out);
            }
        }
        Ok(out)
    }

    /// `P v`
    pub fn project(&self, v: &[f64]) -> Result<Vec<f64>> {
        let resid = self.annihilate(v)?;
        Ok(v.iter().zip(&resid).map(|(a, b)| a - b).collect())
    }

    /// Diagonal of the projection matrix.
    pub fn leverages(&self) -> Vec<f64> {
        let n = self.rows();
        let mut lev = vec![0.0; n];
        for k in 0..self.rank() {
            for (l, q) in lev.iter_mut().zip(self.q(k)) {
                *l += q * q;
            }
        }
        lev
    }

    /// `sum_{i != j} w_i w_j P_ij^2`, via `||Q' diag(w) Q||_F^2 - sum_i w_i^2 P_ii^2`.
    pub fn weighted_offdiag_norm(&self, w: &[f64]) -> Result<f64> {
        self.check_len(w)?;
        if let Some(i) = w.iter().position(|x| !(*x >= 0.0) || !x.is_finite()) {
            return Err(Error::input(format!("weight {i} is negative or non-finite")));
        }
        let r = self.rank();
        let n = self.rows();
        let mut frob = 0.0;
        let mut wq = vec![0.0; n];
        for k in 0..r {
            let qk = self.q(k);
            for i in 0..n {
                wq[i] = w[i] * qk[i];
            }
            frob += dot(&wq, qk).powi(2);
            let mut off = 0.0;
            for l in (k + 1)..r {
                off += dot(&wq, self.q(l)).powi(2);
            }
            frob += 2.0 * off;
        }
        let diag: f64 = self
            .leverages()
            .iter()
            .zip(w)
            .map(|(p, wi)| (wi * p).powi(2))
            .sum();
        Ok((frob - diag).max(0.0))
    }

    /// Least-squares coefficients on the kept columns, `R^{-1} Q' y`.
    pub fn coefficients(&self, y: &[f64]) -> Result<Vec<f64>> {
        self.check_len(y)?;
        let c = self.coordinates(y);
        Ok(self.solve_r(c))
    }

    fn solve_r(&self, mut b: Vec<f64>) -> Vec<f64> {
        let r = self.rank();
        for i in (0..r).rev() {
            let mut s = b[i];
            for j in (i + 1)..r {
                s -= self.r_at(i, j) * b[j];
            }
            b[i] = s / self.r_at(i, i);
        }
        b
    }

    /// Columns of `(X'X)^{-1} X'` for the kept columns, one `r`-vector per
    /// observation, concatenated.
    fn pseudo_inverse_columns(&self) -> Vec<f64> {
        let n = self.rows();
        let r = self.rank();
        let mut data = Vec::with_capacity(n * r);
        let mut qi = vec![0.0; r];
        for i in 0..n {
            for (k, v) in qi.iter_mut().enumerate() {
                *v = self.basis.get(i, k);
            }
            data.extend(self.solve_r(qi.clone()));
        }
        data
    }

    /// Sandwich standard errors of the least-squares coefficients on the
    /// kept columns, given residuals `e`. Robust (HC0) without clusters,
    /// block-sum cluster-robust otherwise.
    pub fn sandwich_se(&self, e: &[f64], clusters: Option<&Clusters>) -> Result<Vec<f64>> {
        self.check_len(e)?;
        let r = self.rank();
        if r == 0 {
            return Ok(Vec::new());
        }
        let pinv = self.pseudo_inverse_columns();
        let mut var = vec![0.0; r];
        match clusters {
            None => {
                for (i, ei) in e.iter().enumerate() {
                    let ci = &pinv[i * r..(i + 1) * r];
                    for k in 0..r {
                        var[k] += (ei * ci[k]).powi(2);
                    }
                }
            }
            Some(cl) => {
                cl.check_len(e.len())?;
                let mut sums = vec![0.0; cl.count() * r];
                for (i, ei) in e.iter().enumerate() {
                    let g = cl.group(i);
                    let ci = &pinv[i * r..(i + 1) * r];
                    for k in 0..r {
                        sums[g * r + k] += ei * ci[k];
                    }
                }
                for g in 0..cl.count() {
                    for k in 0..r {
                        var[k] += sums[g * r + k].powi(2);
                    }
                }
            }
        }
        Ok(var.into_iter().map(f64::sqrt).collect())
    }

    fn check_len(&self, v: &[f64]) -> Result<()> {
        if v.len() != self.rows() {
            return Err(Error::input(format!(
                "vector has length {}, expected {}",
                v.len(),
                self.rows()
            )));
        }
        Ok(())
    }
}

struct Builder {
    n: usize,
    tol: f64,
    q: Vec<f64>,
    r_cols: Vec<Vec<f64>>,
    kept: Vec<usize>,
    dropped: Vec<usize>,
}

impl Builder {
    fn admit(&mut self, index: usize, col: &[f64]) {
        let norm0 = norm2(col);
        if norm0 == 0.0 {
            self.dropped.push(index);
            return;
        }
        let r = self.kept.len();
        let mut v = col.to_vec();
        let mut coef = vec![0.0; r];
        // classical Gram-Schmidt plus one full reorthogonalization pass
        for _ in 0..2 {
            for k in 0..r {
                let qk = &self.q[k * self.n..(k + 1) * self.n];
                let c = dot(qk, &v);
                coef[k] += c;
                axpy(-c, qk, &mut v);
            }
        }
        let resid = norm2(&v);
        if resid <= self.tol * norm0 {
            self.dropped.push(index);
            return;
        }
        for x in v.iter_mut() {
            *x /= resid;
        }
        self.q.extend_from_slice(&v);
        coef.push(resid);
        self.r_cols.push(coef);
        self.kept.push(index);
    }

    fn finish(self, source_cols: usize) -> ProjectionBundle {
        let r = self.kept.len();
        let mut r_factor = vec![0.0; r * r];
        for (j, col) in self.r_cols.iter().enumerate() {
            for (i, v) in col.iter().enumerate() {
                r_factor[j * r + i] = *v;
            }
        }
        ProjectionBundle {
            basis: DenseMatrix {
                rows: self.n,
                cols: r,
                data: self.q,
            },
            r_factor,
            kept: self.kept,
            dropped: self.dropped,
            source_cols,
            tolerance: self.tol,
        }
    }
}

/// Greedy rank-revealing orthogonalization of the columns of `x`.
///
/// Column `j` is dropped iff its residual norm after projecting on the
/// previously kept columns is at most `tol` times its own norm. Zero
/// columns are always dropped.
pub fn rank_revealing_decompose(x: &DenseMatrix, tol: f64) -> Result<ProjectionBundle> {
    if !(tol > 0.0) || !tol.is_finite() {
        return Err(Error::input("rank tolerance must be positive and finite"));
    }
    let mut builder = Builder {
        n: x.rows(),
        tol,
        q: Vec::new(),
        r_cols: Vec::new(),
        kept: Vec::new(),
        dropped: Vec::new(),
    };
    for (j, col) in x.columns().enumerate() {
        builder.admit(j, col);
    }
    Ok(builder.finish(x.cols()))
}

/// Decomposition with the default tolerance.
pub fn decompose(x: &DenseMatrix) -> Result<ProjectionBundle> {
    rank_revealing_decompose(x, DEFAULT_RANK_TOL)
}

/// Cluster membership, remapped to dense group indices `0..count`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Clusters {
    groups: Vec<usize>,
    count: usize,
}

impl Clusters {
    /// Groups are numbered in order of first appearance.
    pub fn from_ids<T: Eq + std::hash::Hash + Clone>(ids: &[T]) -> Self {
        let mut map = std::collections::HashMap::new();
        let groups = ids
            .iter()
            .map(|id| {
                let next = map.len();
                *map.entry(id.clone()).or_insert(next)
            })
            .collect();
        Clusters {
            groups,
            count: map.len(),
        }
    }

    pub fn len(&self) -> usize {
        self.groups.len()
    }

    pub fn is_empty(&self) -> bool {
        self.groups.is_empty()
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn group(&self, i: usize) -> usize {
        self.groups[i]
    }

    pub fn groups(&self) -> &[usize] {
        &self.groups
    }

    pub(crate) fn check_len(&self, n: usize) -> Result<()> {
        if self.groups.len() != n {
            return Err(Error::input(format!(
                "cluster ids have length {}, expected {n}",
                self.groups.len()
            )));
        }
        Ok(())
    }

    /// `sum_g (sum_{i in g} v_i)^2`
    pub fn block_sum_sq(&self, v: &[f64]) -> f64 {
        let mut sums = vec![0.0; self.count];
        for (i, x) in v.iter().enumerate() {
            sums[self.groups[i]] += x;
        }
        sums.iter().map(|s| s * s).sum()
    }
}

/// Determinant by LU with partial pivoting. Intended for small matrices.
pub fn determinant(a: &DenseMatrix) -> Result<f64> {
    let n = a.rows();
    if a.cols() != n {
        return Err(Error::input("determinant of a non-square matrix"));
    }
    let mut m = a.to_rows();
    let mut det = 1.0;
    for c in 0..n {
        let piv = (c..n)
            .max_by(|&i, &j| m[i][c].abs().total_cmp(&m[j][c].abs()))
            .unwrap_or(c);
        if m[piv][c] == 0.0 {
            return Ok(0.0);
        }
        if piv != c {
            m.swap(piv, c);
            det = -det;
        }
        det *= m[c][c];
        for i in (c + 1)..n {
            let f = m[i][c] / m[c][c];
            if f != 0.0 {
                for j in c..n {
                    m[i][j] -= f * m[c][j];
                }
            }
        }
    }
    Ok(det)
}
