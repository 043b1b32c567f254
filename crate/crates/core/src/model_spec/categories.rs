//! Re-expressions of a categorical variable as indicators of category subsets.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{decompose, DenseMatrix};
use crate::rng::{rng_from_seed, Rng};

/// Maximum number of redraws when sampling a full-rank binary matrix.
pub const MAX_REDRAWS: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CategoryMapMode {
    /// `k x k` full-rank map; its indicator columns span the constant.
    Full,
    /// `(k-1) x k` map whose rows together with the constant span `R^k`.
    InterceptAbsorbed,
}

/// Binary matrix `A` whose row `j` is the indicator of the `j`-th category subset.
/// An observation in category `g` gets regressor values `A[.][g]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CategoryMap {
    pub k: usize,
    pub rows: Vec<Vec<u8>>,
    pub mode: CategoryMapMode,
}

impl CategoryMap {
    pub fn identity(k: usize) -> Self {
        let rows = (0..k)
            .map(|j| (0..k).map(|g| u8::from(g == j)).collect())
            .collect();
        CategoryMap {
            k,
            rows,
            mode: CategoryMapMode::Full,
        }
    }

    /// Matrix with one column per subset, one row per category.
    pub fn as_matrix(&self) -> DenseMatrix {
        DenseMatrix::from_fn(self.k, self.rows.len(), |g, j| f64::from(self.rows[j][g]))
    }

    pub fn rank(&self) -> usize {
        decompose(&self.as_matrix()).map(|b| b.rank()).unwrap_or(0)
    }

    /// Drops the first subset row (in order) that is redundant once a
    /// constant is present.
    pub fn absorb_intercept(&self) -> Result<CategoryMap> {
        if self.mode != CategoryMapMode::Full {
            return Ok(self.clone());
        }
        let mut cols = vec![vec![1.0; self.k]];
        cols.extend(
            self.rows
                .iter()
                .map(|r| r.iter().map(|&v| f64::from(v)).collect::<Vec<_>>()),
        );
        let b = decompose(&DenseMatrix::from_columns(&cols)?)?;
        if b.rank() != self.k || b.kept()[0] != 0 {
            return Err(Error::Numerical("category map is not full rank".into()));
        }
        let drop = b.dropped()[0] - 1;
        let rows = self
            .rows
            .iter()
            .enumerate()
            .filter(|(j, _)| *j != drop)
            .map(|(_, r)| r.clone())
            .collect();
        Ok(CategoryMap {
            k: self.k,
            rows,
            mode: CategoryMapMode::InterceptAbsorbed,
        })
    }

    /// Encoded regressors for observations with category codes `codes`.
    pub fn encode(&self, codes: &[usize]) -> Vec<Vec<f64>> {
        self.rows
            .iter()
            .map(|row| codes.iter().map(|&g| f64::from(row[g])).collect())
            .collect()
    }
}

/// Draws `k x k` matrices with i.i.d. Bernoulli(`q`) entries until one is
/// full rank. Returns the matrix and the number of singular draws discarded.
pub fn draw_full_rank_bernoulli(k: usize, q: f64, rng: &mut Rng) -> Result<(CategoryMap, usize)> {
    if k < 1 {
        return Err(Error::input("category count must be positive"));
    }
    for attempt in 0..MAX_REDRAWS {
        let map = draw_bernoulli(k, q, rng);
        if map.rank() == k {
            return Ok((map, attempt));
        }
    }
    Err(Error::Numerical(format!(
        "no full-rank {k}x{k} binary matrix in {MAX_REDRAWS} draws"
    )))
}

pub fn draw_bernoulli(k: usize, q: f64, rng: &mut Rng) -> CategoryMap {
    let rows = (0..k)
        .map(|_| (0..k).map(|_| u8::from(rng.random::<f64>() < q)).collect())
        .collect();
    CategoryMap {
        k,
        rows,
        mode: CategoryMapMode::Full,
    }
}

/// Random subset re-expression of a `k`-level categorical, Bernoulli(1/2) entries.
pub fn random_category_sums(k: usize, seed: u64) -> Result<CategoryMap> {
    if k < 2 {
        return Err(Error::input("categorical needs at least 2 levels"));
    }
    let mut rng = rng_from_seed(seed);
    draw_full_rank_bernoulli(k, 0.5, &mut rng).map(|(m, _)| m)
}
