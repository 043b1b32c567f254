use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::beta::beta_reg;

use crate::error::{Error, Result};
use crate::linalg::{decompose, determinant, dot, DenseMatrix};
use crate::model_spec::categories::draw_bernoulli;
use crate::rng::{gaussian_vec, rng_for, rng_from_seed, Rng};
use crate::stats::binomial_sd;

/// Uniformly distributed rotation (orthogonal, determinant +1).
pub fn haar_rotation(p: usize, seed: u64) -> Result<DenseMatrix> {
    haar_rotation_with(p, &mut rng_from_seed(seed))
}

pub fn haar_rotation_with(p: usize, rng: &mut Rng) -> Result<DenseMatrix> {
    if p == 0 {
        return Err(Error::input("rotation dimension must be positive"));
    }
    loop {
        let g = DenseMatrix::from_col_major(p, p, gaussian_vec(rng, p * p))?;
        let b = decompose(&g)?;
        if b.rank() < p {
            continue;
        }
        // Gram-Schmidt yields a positive diagonal in R, which makes Q Haar on O(p).
        let q = b.basis().clone();
        if determinant(&q)? > 0.0 {
            return Ok(q);
        }
        let mut cols: Vec<Vec<f64>> = q.columns().map(<[f64]>::to_vec).collect();
        for v in cols[0].iter_mut() {
            *v = -*v;
        }
        return DenseMatrix::from_columns(&cols);
    }
}

/// The sparsity index used throughout: `floor(sqrt(p) / ln p)`, at least 1.
pub fn sparsity_index(p: usize) -> usize {
    let pf = p as f64;
    ((pf.sqrt() / pf.ln()).floor() as usize).max(1)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparsityCheck {
    pub p: usize,
    pub s: usize,
    /// Smallest quadratic approximation error over `s`-sparse vectors
    /// (an upper bound when `approximate`).
    pub approx_error: f64,
    /// `s / p`
    pub threshold: f64,
    /// Largest sparsity index admitted by the rate condition.
    pub rate_bound: usize,
    pub satisfied: bool,
    pub approximate: bool,
}

/// Sum of the `p - s` smallest squared entries.
fn order_statistic_error(coefs: &[f64], s: usize) -> f64 {
    let mut sq: Vec<f64> = coefs.iter().map(|c| c * c).collect();
    sq.sort_by(f64::total_cmp);
    sq[..coefs.len() - s].iter().sum()
}

fn solve_small(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for c in 0..n {
        let piv = (c..n).max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs()))?;
        if a[piv][c].abs() < 1e-300 {
            return None;
        }
        a.swap(c, piv);
        b.swap(c, piv);
        for r in (c + 1)..n {
            let f = a[r][c] / a[c][c];
            for k in c..n {
                a[r][k] -= f * a[c][k];
            }
            b[r] -= f * b[c];
        }
    }
    for c in (0..n).rev() {
        let s: f64 = ((c + 1)..n).map(|k| a[c][k] * b[k]).sum();
        b[c] = (b[c] - s) / a[c][c];
    }
    Some(b)
}

/// Greedy orthogonal matching pursuit on `(g - v)' G (g - v)`.
fn omp_error(coefs: &[f64], gram: &DenseMatrix, s: usize) -> f64 {
    let p = coefs.len();
    let gg = gram.mul_vec(coefs);
    let total = dot(coefs, &gg);
    let mut support: Vec<usize> = Vec::new();
    let mut v = vec![0.0; p];
    let mut err = total;
    for _ in 0..s {
        let resid: Vec<f64> = coefs.iter().zip(&v).map(|(c, x)| c - x).collect();
        let grad = gram.mul_vec(&resid);
        let next = (0..p)
            .filter(|j| !support.contains(j) && gram.get(*j, *j) > 0.0)
            .max_by(|&i, &j| {
                let si = grad[i].abs() / gram.get(i, i).sqrt();
                let sj = grad[j].abs() / gram.get(j, j).sqrt();
                si.total_cmp(&sj)
            });
        let Some(j) = next else { break };
        support.push(j);
        let a: Vec<Vec<f64>> = support.iter().map(|&r| support.iter().map(|&c| gram.get(r, c)).collect()).collect();
        let b: Vec<f64> = support.iter().map(|&r| gg[r]).collect();
        let Some(sol) = solve_small(a, b.clone()) else { break };
        v = vec![0.0; p];
        for (k, &j) in support.iter().enumerate() {
            v[j] = sol[k];
        }
        err = (total - dot(&sol, &b)).max(0.0);
    }
    err
}

/// Approximation error of the best `s`-term representation of `coefs`
/// under the quadratic form `gram` (identity if omitted).
///
/// `satisfied` holds when some sparsity level `s' <= min(s, rate_bound)`
/// reaches error at most `s' / p`, where `rate_bound = floor(sqrt(p)/ln p)`.
pub fn sparse_approx_error(coefs: &[f64], gram: Option<&DenseMatrix>, s: usize) -> Result<SparsityCheck> {
    let p = coefs.len();
    if s >= p {
        return Err(Error::input(format!("sparsity index {s} must be below the dimension {p}")));
    }
    if let Some(g) = gram {
        if g.rows() != p || g.cols() != p {
            return Err(Error::input("gram matrix must be square with one row per coefficient"));
        }
    }
    let error_at = |k: usize| match gram {
        None => order_statistic_error(coefs, k),
        Some(g) => omp_error(coefs, g, k),
    };
    let approx_error = error_at(s);
    let rate_bound = sparsity_index(p);
    let s_eff = s.min(rate_bound);
    let satisfied = (1..=s_eff).any(|k| error_at(k) <= k as f64 / p as f64);
    Ok(SparsityCheck {
        p,
        s,
        approx_error,
        threshold: s as f64 / p as f64,
        rate_bound,
        satisfied,
        approximate: gram.is_some(),
    })
}

/// Upper bound on the log probability of a sparse rotated representation,
/// `(3/2) s - (p/4 - s + 1/2) ln p`.
pub fn rotation_log_bound(p: usize, s: usize) -> f64 {
    let (pf, sf) = (p as f64, s as f64);
    1.5 * sf - (pf / 4.0 - sf + 0.5) * pf.ln()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BetaCheck {
    pub x: f64,
    pub mc_probability: f64,
    pub analytic: f64,
    pub mc_sd: f64,
    pub within_3_sd: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RotationRarity {
    pub p: usize,
    pub s: usize,
    pub trials: usize,
    pub satisfied_count: usize,
    pub mc_probability: f64,
    pub mc_sd: f64,
    pub log_bound: f64,
    pub beta_checks: Vec<BetaCheck>,
}

/// Fraction of Haar rotations of `e_1` with a sparse representation, and a
/// Monte Carlo check of `P(sum_{j <= p-s} Z_j^2 / ||Z||^2 <= x) = I_x((p-s)/2, s/2)`.
pub fn rotation_rarity_experiment(p: usize, trials: usize, seed: u64) -> Result<RotationRarity> {
    rotation_rarity_with_s(p, sparsity_index(p), trials, seed)
}

pub fn rotation_rarity_with_s(p: usize, s: usize, trials: usize, seed: u64) -> Result<RotationRarity> {
    if p < 2 || s == 0 || s >= p {
        return Err(Error::input("need 1 <= s < p"));
    }
    if trials == 0 {
        return Err(Error::input("trials must be at least 1"));
    }
    let pf = p as f64;
    let xs = [s as f64 / pf, 2.0 * s as f64 / pf, (p - s) as f64 / pf];
    let per_trial: Vec<Result<(bool, [bool; 3])>> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let r = haar_rotation_with(p, &mut rng_for(seed, t as u64))?;
            // R e_1 is the first column.
            let g = r.column(0);
            let check = sparse_approx_error(g, None, s)?;
            let head: f64 = g[..p - s].iter().map(|v| v * v).sum();
            let total: f64 = g.iter().map(|v| v * v).sum();
            let ratio = head / total;
            Ok((check.satisfied, xs.map(|x| ratio <= x)))
        })
        .collect();
    let mut satisfied_count = 0;
    let mut below = [0usize; 3];
    for r in per_trial {
        let (sat, b) = r?;
        satisfied_count += usize::from(sat);
        for k in 0..3 {
            below[k] += usize::from(b[k]);
        }
    }
    let a = (p - s) as f64 / 2.0;
    let b = s as f64 / 2.0;
    let beta_checks = xs
        .iter()
        .zip(below)
        .map(|(&x, count)| {
            let analytic = beta_reg(a, b, x);
            let mc = count as f64 / trials as f64;
            let mc_sd = binomial_sd(analytic, trials);
            BetaCheck {
                x,
                mc_probability: mc,
                analytic,
                mc_sd,
                within_3_sd: (mc - analytic).abs() <= 3.0 * mc_sd,
            }
        })
        .collect();
    let mc_probability = satisfied_count as f64 / trials as f64;
    Ok(RotationRarity {
        p,
        s,
        trials,
        satisfied_count,
        mc_probability,
        mc_sd: binomial_sd(mc_probability, trials),
        log_bound: rotation_log_bound(p, s),
        beta_checks,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryExperiment {
    pub p: usize,
    pub q: f64,
    pub k_zeros: usize,
    pub s: usize,
    pub trials: usize,
    pub singular_rate: f64,
    pub sparsity_rate: f64,
    pub sparsity_mc_sd: f64,
    pub theorem2_bound: f64,
    /// Sparse fits were searched exhaustively (otherwise greedily).
    pub exact_search: bool,
}

/// `min over supports of size <= s of ||psi - A' v||^2`, where the
/// candidate regressors are the rows of `rows`.
fn subset_fit_error(rows: &[Vec<f64>], psi: &[f64], s: usize, exact: bool) -> f64 {
    let base = dot(psi, psi);
    let fit_error = |support: &[usize]| -> f64 {
        let a: Vec<Vec<f64>> = support
            .iter()
            .map(|&i| support.iter().map(|&j| dot(&rows[i], &rows[j])).collect())
            .collect();
        let b: Vec<f64> = support.iter().map(|&i| dot(&rows[i], psi)).collect();
        match solve_small(a, b.clone()) {
            Some(sol) => (base - dot(&sol, &b)).max(0.0),
            None => f64::INFINITY,
        }
    };
    let k = rows.len();
    if exact && s <= 2 {
        let mut best = base;
        for i in 0..k {
            best = best.min(fit_error(&[i]));
            if s == 2 {
                for j in (i + 1)..k {
                    best = best.min(fit_error(&[i, j]));
                }
            }
        }
        return best;
    }
    let mut support = Vec::new();
    let mut best = base;
    for _ in 0..s {
        let cand = (0..k)
            .filter(|i| !support.contains(i))
            .map(|i| {
                let mut t = support.clone();
                t.push(i);
                (fit_error(&t), i)
            })
            .min_by(|a, b| a.0.total_cmp(&b.0));
        let Some((e, i)) = cand else { break };
        support.push(i);
        best = best.min(e);
    }
    best
}

/// Random Bernoulli(q) re-expressions of a categorical whose true effect
/// is one subset indicator with `k_zeros` zeros.
pub fn bernoulli_category_experiment(p: usize, q: f64, k_zeros: usize, trials: usize, seed: u64) -> Result<CategoryExperiment> {
    if !(q > 0.0 && q <= 0.5) {
        return Err(Error::input("q must lie in (0, 1/2]"));
    }
    if k_zeros >= p {
        return Err(Error::input("K must be below p"));
    }
    if trials == 0 {
        return Err(Error::input("trials must be at least 1"));
    }
    let s = sparsity_index(p);
    let exact = s <= 2;
    let psi: Vec<f64> = (0..p).map(|g| f64::from(u8::from(g >= k_zeros))).collect();
    let outcomes: Vec<Option<bool>> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = rng_for(seed, t as u64);
            let map = draw_bernoulli(p, q, &mut rng);
            if map.rank() < p {
                return None;
            }
            let rows: Vec<Vec<f64>> = map
                .rows
                .iter()
                .map(|r| r.iter().map(|&v| f64::from(v)).collect())
                .collect();
            Some(subset_fit_error(&rows, &psi, s, exact) <= s as f64)
        })
        .collect();
    let singular = outcomes.iter().filter(|o| o.is_none()).count();
    let full: Vec<bool> = outcomes.into_iter().flatten().collect();
    let sparse = full.iter().filter(|&&b| b).count();
    let sparsity_rate = if full.is_empty() { 0.0 } else { sparse as f64 / full.len() as f64 };
    Ok(CategoryExperiment {
        p,
        q,
        k_zeros,
        s,
        trials,
        singular_rate: singular as f64 / trials as f64,
        sparsity_rate,
        sparsity_mc_sd: binomial_sd(sparsity_rate, full.len().max(1)),
        theorem2_bound: (1.0 - q + 0.05).powi(k_zeros as i32),
        exact_search: exact,
    })
}
