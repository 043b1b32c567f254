//! Library results checked against independent dense-matrix computations.
//! Each check panics on failure.

use super::*;
use nalgebra::{DMatrix, DVector};
use sparsity_audit::estimators::{
    lasso, ols_fwl, post_double_selection, t_screen, Controls, LassoOptions, DOUBLE_T_THRESHOLD,
};
use sparsity_audit::linalg::{decompose, Clusters, DenseMatrix};
use sparsity_audit::model_spec::DesignMatrix;
use sparsity_audit::rng::gaussian_vec;
use sparsity_audit::sparsity_tests::{hausman_test, residual_test, ResidualTarget};
use sparsity_audit::theory_lab::{hermite_shift_coeffs, sparse_approx_error, sparsity_index};

pub fn fwl_matches_normal_equations() {
    for (case, &(n, k)) in [(30usize, 3usize), (120, 20), (500, 60)].iter().enumerate() {
        let mut r = rng(100 + case as u64);
        let w = with_intercept(&gaussian_matrix(&mut r, n, k));
        let d: Vec<f64> = gaussian_vec(&mut r, n).iter().zip(w.column(1)).map(|(e, w1)| e + 0.5 * w1).collect();
        let y: Vec<f64> = gaussian_vec(&mut r, n).iter().zip(&d).map(|(e, di)| e + 0.7 * di).collect();
        let fit = ols_fwl(&y, &d, &decompose(&w).unwrap(), None).unwrap();

        let x = to_na(&w.with_column(&d).unwrap());
        let coef = normal_equations(&x, &vec_na(&y));
        let beta = coef[k + 1];
        assert!(rel_close(fit.beta, beta, 1e-8), "n={n}: {} vs {beta}", fit.beta);

        let e = vec_na(&y) - &x * &coef;
        let se = sandwich_cov(&x, &e, None)[(k + 1, k + 1)].sqrt();
        assert!(rel_close(fit.se, se, 1e-8), "n={n}: se {} vs {se}", fit.se);

        let groups: Vec<usize> = (0..n).map(|i| i % 7).collect();
        let cl = Clusters::from_ids(&groups);
        let fit_c = ols_fwl(&y, &d, &decompose(&w).unwrap(), Some(&cl)).unwrap();
        let se_c = sandwich_cov(&x, &e, Some(&groups))[(k + 1, k + 1)].sqrt();
        assert!(rel_close(fit_c.se, se_c, 1e-8), "n={n}: clustered se {} vs {se_c}", fit_c.se);
    }
}

pub fn offdiag_norm_and_leverages_match_hat_matrix() {
    for (case, &(n, k)) in [(15usize, 4usize), (80, 12), (200, 50)].iter().enumerate() {
        let mut r = rng(200 + case as u64);
        let x = gaussian_matrix(&mut r, n, k);
        let w: Vec<f64> = (0..n).map(|_| uniform(&mut r, 0.0, 3.0)).collect();
        let b = decompose(&x).unwrap();
        let p = hat_matrix(&to_na(&x));
        let mut oracle = 0.0;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    oracle += w[i] * w[j] * p[(i, j)].powi(2);
                }
            }
        }
        let got = b.weighted_offdiag_norm(&w).unwrap();
        assert!(rel_close(got, oracle, 1e-8), "n={n}: {got} vs {oracle}");
        for (i, l) in b.leverages().iter().enumerate() {
            assert!((l - p[(i, i)]).abs() < 1e-8);
        }
    }
}

pub fn residual_test_terms_match_hat_matrix() {
    let (n, k) = (120, 15);
    let mut r = rng(300);
    let x = with_intercept(&gaussian_matrix(&mut r, n, k));
    let y = gaussian_vec(&mut r, n);
    let b = decompose(&x).unwrap();
    // Residuals from a regression on a subset of the columns.
    let sub = decompose(&x.select_columns(&[0, 1, 2])).unwrap();
    let resid = sub.annihilate(&y).unwrap();
    let p = hat_matrix(&to_na(&x));

    let rep = residual_test(&b, ResidualTarget::Outcome, &y, &resid, 0.05, None).unwrap();
    let bias: f64 = (0..n).map(|i| resid[i].powi(2) * p[(i, i)]).sum();
    let mut var = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                var += 2.0 * resid[i].powi(2) * resid[j].powi(2) * p[(i, j)].powi(2);
            }
        }
    }
    let ols_e = vec_na(&y) - &p * vec_na(&y);
    let numerator = resid.iter().map(|e| e * e).sum::<f64>() - ols_e.norm_squared();
    assert!(rel_close(rep.bias_term, bias, 1e-8));
    assert!(rel_close(rep.var_term, var, 1e-8));
    assert!(rel_close(rep.numerator, numerator, 1e-8));

    let groups: Vec<usize> = (0..n).map(|i| i / 6).collect();
    let cl = Clusters::from_ids(&groups);
    let rep_c = residual_test(&b, ResidualTarget::Outcome, &y, &resid, 0.05, Some(&cl)).unwrap();
    let ng = n / 6;
    let mut block = DMatrix::<f64>::zeros(ng, ng);
    for i in 0..n {
        for j in 0..n {
            block[(groups[i], groups[j])] += resid[i] * resid[j] * p[(i, j)];
        }
    }
    let bias_c: f64 = (0..ng).map(|g| block[(g, g)]).sum();
    let mut var_c = 0.0;
    for g in 0..ng {
        for h in 0..ng {
            if g != h {
                var_c += 2.0 * block[(g, h)].powi(2);
            }
        }
    }
    assert!(rel_close(rep_c.bias_term, bias_c, 1e-8));
    assert!(rel_close(rep_c.var_term, var_c, 1e-8));
}

fn soft(z: f64, t: f64) -> f64 {
    z.signum() * (z.abs() - t).max(0.0)
}

pub fn one_dimensional_lasso_is_soft_threshold() {
    let mut r = rng(400);
    for _ in 0..200 {
        let n = 5 + (uniform(&mut r, 0.0, 40.0) as usize);
        let x = gaussian_vec(&mut r, n);
        let y = gaussian_vec(&mut r, n);
        let lambda = uniform(&mut r, 0.0, 5.0);
        let loading = uniform(&mut r, 0.2, 2.0);
        let xtx: f64 = x.iter().map(|v| v * v).sum();
        let xty: f64 = x.iter().zip(&y).map(|(a, b)| a * b).sum();
        let oracle = soft(xty, lambda * loading) / xtx;
        let fit = lasso(&DenseMatrix::from_columns(&[x]).unwrap(), &y, lambda, &[loading], &LassoOptions::default())
            .unwrap();
        assert!((fit.alpha_hat[0] - oracle).abs() <= 1e-10 * oracle.abs().max(1.0), "{} vs {oracle}", fit.alpha_hat[0]);
    }
}

/// Largest KKT violation relative to `lambda`, computed from scratch.
fn kkt_oracle(x: &DenseMatrix, y: &[f64], alpha: &[f64], lambda: f64, loadings: &[f64]) -> f64 {
    let xa = to_na(x) * vec_na(alpha);
    let resid = vec_na(y) - xa;
    let mut worst: f64 = 0.0;
    for j in 0..x.cols() {
        let g: f64 = x.column(j).iter().zip(resid.iter()).map(|(a, b)| a * b).sum();
        let lim = lambda * loadings[j];
        let v = if alpha[j] == 0.0 { (g.abs() - lim).max(0.0) } else { (g - lim * alpha[j].signum()).abs() };
        worst = worst.max(v);
    }
    worst / lambda
}

pub fn lasso_kkt_certificates_on_random_instances() {
    let mut r = rng(500);
    for inst in 0..100 {
        let n = 20 + (uniform(&mut r, 0.0, 60.0) as usize);
        let p = 2 + (uniform(&mut r, 0.0, 2.0 * n as f64) as usize);
        let x = gaussian_matrix(&mut r, n, p);
        let beta: Vec<f64> = (0..p).map(|j| if j < 3 { 1.5 } else { 0.0 }).collect();
        let signal = x.mul_vec(&beta);
        let y: Vec<f64> = gaussian_vec(&mut r, n).iter().zip(&signal).map(|(e, s)| e + s).collect();
        let loadings: Vec<f64> = (0..p).map(|_| uniform(&mut r, 0.5, 1.5)).collect();
        let xty_max = (0..p)
            .map(|j| x.column(j).iter().zip(&y).map(|(a, b)| a * b).sum::<f64>().abs() / loadings[j])
            .fold(0.0, f64::max);
        let lambda = xty_max * uniform(&mut r, 0.05, 0.9);
        let fit = lasso(&x, &y, lambda, &loadings, &LassoOptions::default()).unwrap();
        assert!(fit.converged, "instance {inst}");
        let v = kkt_oracle(&x, &y, &fit.alpha_hat, lambda, &loadings);
        assert!(v <= 1e-6, "instance {inst}: KKT violation {v:e} (n={n}, p={p})");
    }
}

pub fn double_t_screen_matches_explicit_t_statistics() {
    let (n, k) = (300, 25);
    let mut r = rng(600);
    let w = gaussian_matrix(&mut r, n, k);
    let v: Vec<f64> = gaussian_vec(&mut r, n)
        .iter()
        .enumerate()
        .map(|(i, e)| e + 0.3 * w.get(i, 0) + 0.15 * w.get(i, 4) + 0.1 * w.get(i, 9))
        .collect();
    let controls = Controls::new(DesignMatrix::with_intercept(&w).unwrap()).unwrap();
    let x = to_na(&with_intercept(&w));
    let coef = normal_equations(&x, &vec_na(&v));
    let e = vec_na(&v) - &x * &coef;
    let cov = sandwich_cov(&x, &e, None);
    let oracle: Vec<usize> = (1..=k).filter(|&j| (coef[j] / cov[(j, j)].sqrt()).abs() > DOUBLE_T_THRESHOLD).collect();
    let mut got = t_screen(&controls, &v, DOUBLE_T_THRESHOLD, None).unwrap();
    got.sort_unstable();
    assert_eq!(got, oracle);
    assert!(!oracle.is_empty());
}

pub fn hausman_scale_matches_explicit_residuals() {
    let (n, k) = (400, 30);
    let mut r = rng(700);
    let w = gaussian_matrix(&mut r, n, k);
    let d: Vec<f64> = gaussian_vec(&mut r, n).iter().enumerate().map(|(i, e)| e + 0.8 * w.get(i, 0)).collect();
    let y: Vec<f64> =
        gaussian_vec(&mut r, n).iter().enumerate().map(|(i, e)| e + 0.5 * d[i] + 0.8 * w.get(i, 1)).collect();
    let controls = Controls::new(DesignMatrix::with_intercept(&w).unwrap()).unwrap();
    let ols = controls.ols(&y, &d, None).unwrap();
    let sbe = post_double_selection(&y, &d, &controls, None, &LassoOptions::default()).unwrap();
    let hr = hausman_test(&ols, &sbe, None).unwrap();

    let full = with_intercept(&w);
    let fx = to_na(&full);
    let dd = vec_na(&d) - hat_matrix(&fx) * vec_na(&d);
    let mut prop_cols = vec![0];
    prop_cols.extend(sbe.selected_propensity.iter().copied());
    let px = to_na(&full.select_columns(&prop_cols));
    let dh = vec_na(&d) - hat_matrix(&px) * vec_na(&d);
    let mut union_cols = vec![0];
    union_cols.extend(sbe.selected_union.iter().copied());
    let ux = to_na(&full.select_columns(&union_cols).with_column(&d).unwrap());
    let coef = normal_equations(&ux, &vec_na(&y));
    let u = vec_na(&y) - &ux * &coef;
    assert!(rel_close(sbe.beta_star, coef[union_cols.len()], 1e-8));
    let (ddn, dhn) = (dd.norm_squared(), dh.norm_squared());
    let var: f64 = (0..n).map(|i| ((dd[i] / ddn - dh[i] / dhn) * u[i]).powi(2)).sum();
    assert!(rel_close(hr.se_h, var.sqrt(), 1e-8), "{} vs {}", hr.se_h, var.sqrt());
    assert!(rel_close(hr.diff, ols.beta - coef[union_cols.len()], 1e-8));
}

fn exhaustive_error(c: &[f64], s: usize) -> f64 {
    let p = c.len();
    let total: f64 = c.iter().map(|v| v * v).sum();
    let mut best = total;
    let mut stack: Vec<(usize, Vec<usize>)> = vec![(0, Vec::new())];
    while let Some((start, support)) = stack.pop() {
        let kept: f64 = support.iter().map(|&j| c[j] * c[j]).sum();
        best = best.min(total - kept);
        if support.len() < s {
            for j in start..p {
                let mut t = support.clone();
                t.push(j);
                stack.push((j + 1, t));
            }
        }
    }
    best
}

pub fn sparse_error_matches_exhaustive_supports() {
    let mut r = rng(800);
    for p in 4..=12usize {
        for s in 1..=3usize.min(p - 1) {
            for _ in 0..20 {
                // Dyadic coefficients keep every partial sum exact in floating point.
                let c: Vec<f64> = (0..p).map(|_| (uniform(&mut r, -64.0, 64.0).round()) / 64.0).collect();
                let norm: f64 = c.iter().map(|v| v * v).sum();
                let oracle = exhaustive_error(&c, s);
                let got = sparse_approx_error(&c, None, s).unwrap();
                assert_eq!(got.approx_error, oracle, "p={p} s={s} c={c:?}");
                let with_gram = sparse_approx_error(&c, Some(&DenseMatrix::identity(p)), s).unwrap();
                assert!((with_gram.approx_error - oracle).abs() <= 1e-12 * norm.max(1.0));

                let s_eff = s.min(sparsity_index(p));
                let predicate = (1..=s_eff).any(|k| exhaustive_error(&c, k) <= k as f64 / p as f64);
                assert_eq!(got.satisfied, predicate);
            }
        }
    }
}

/// Monomial coefficients of the orthonormal probabilists' Hermite polynomials.
fn hermite_monomials(max_deg: usize) -> Vec<Vec<f64>> {
    let mut he: Vec<Vec<f64>> = vec![vec![1.0], vec![0.0, 1.0]];
    for m in 1..max_deg {
        let mut next = vec![0.0; m + 2];
        for (i, c) in he[m].iter().enumerate() {
            next[i + 1] += c;
        }
        for (i, c) in he[m - 1].iter().enumerate() {
            next[i] -= m as f64 * c;
        }
        he.push(next);
    }
    let mut fact = 1.0;
    he.iter()
        .take(max_deg + 1)
        .enumerate()
        .map(|(m, p)| {
            if m > 0 {
                fact *= m as f64;
            }
            p.iter().map(|c| c / fact.sqrt()).collect()
        })
        .collect()
}

fn binom(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

pub fn hermite_shift_matches_symbolic_expansion() {
    for p in 2..=12usize {
        let p0 = p - 1;
        let h = hermite_monomials(p0);
        for &lam in &[-1.0f64, -0.3, 0.5, 1.0, -1.3, 2.5] {
            // Expand h_{p0}(z + lam) in powers of z.
            let mut shifted = vec![0.0; p0 + 1];
            for (a, c) in h[p0].iter().enumerate() {
                for b in 0..=a {
                    shifted[b] += c * binom(a, b) * lam.powi((a - b) as i32);
                }
            }
            // Peel off h_{p0-k} from the top degree down.
            let mut oracle = vec![0.0; p0 + 1];
            for k in 0..=p0 {
                let deg = p0 - k;
                let ck = shifted[deg] / h[deg][deg];
                oracle[k] = ck;
                for (i, c) in h[deg].iter().enumerate() {
                    shifted[i] -= ck * c;
                }
            }
            let got = hermite_shift_coeffs(p, lam).unwrap().coefficients();
            for k in 0..=p0 {
                let tol = 1e-10 * oracle[k].abs().max(1e-300);
                assert!((got[k] - oracle[k]).abs() <= tol.max(1e-12), "p={p} lam={lam} k={k}: {} vs {}", got[k], oracle[k]);
            }
        }
    }
}

pub fn sandwich_helper_is_consistent_with_dvector_api() {
    // Guards the oracle helpers themselves on a case solvable by hand.
    let x = DMatrix::from_row_slice(3, 1, &[1.0, 1.0, 1.0]);
    let e = DVector::from_row_slice(&[1.0, -1.0, 2.0]);
    let cov = sandwich_cov(&x, &e, None);
    assert!((cov[(0, 0)] - 6.0 / 9.0).abs() < 1e-15);
}
