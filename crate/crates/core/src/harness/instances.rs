//! Seeded synthetic datasets used by the examples and tests.

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::linalg::DenseMatrix;
use crate::model_spec::{DataTable, DesignMatrix};
use crate::rng::{derive_seed, gaussian_vec, rng_from_seed, Rng};

/// Categorical design in which one level carries the whole control effect.
///
/// `Y = beta D + a 1{g = special} + U` and `D = b 1{g = special} + V`.
/// Dropping any other level leaves a single nonzero dummy coefficient;
/// dropping the special level makes every remaining dummy coefficient
/// equal and nonzero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FragileCategorical {
    pub n: usize,
    pub levels: usize,
    pub special: usize,
    pub beta: f64,
    pub outcome_effect: f64,
    pub treatment_effect: f64,
    pub seed: u64,
}

impl Default for FragileCategorical {
    fn default() -> Self {
        FragileCategorical {
            n: 2000,
            levels: 20,
            special: 7,
            beta: 0.5,
            outcome_effect: 2.0,
            treatment_effect: 1.0,
            seed: 20240917,
        }
    }
}

impl FragileCategorical {
    pub fn level_name(&self, g: usize) -> String {
        format!("c{g:02}")
    }

    pub fn special_level(&self) -> String {
        self.level_name(self.special)
    }

    pub fn table(&self) -> Result<DataTable> {
        let mut rng = rng_from_seed(self.seed);
        let codes: Vec<usize> = (0..self.n).map(|i| i % self.levels).collect();
        let u = gaussian_vec(&mut rng, self.n);
        let v = gaussian_vec(&mut rng, self.n);
        let mut y = Vec::with_capacity(self.n);
        let mut d = Vec::with_capacity(self.n);
        for i in 0..self.n {
            let s = f64::from(u8::from(codes[i] == self.special));
            let di = self.treatment_effect * s + v[i];
            d.push(di);
            y.push(self.beta * di + self.outcome_effect * s + u[i]);
        }
        let fmt = |x: &[f64]| x.iter().map(|v| format!("{v:?}")).collect::<Vec<_>>();
        DataTable::new(
            vec!["y".into(), "d".into(), "g".into()],
            vec![fmt(&y), fmt(&d), codes.iter().map(|&g| self.level_name(g)).collect()],
        )
    }

    /// Recipe that uses the special level as the reference category.
    pub fn misaligned_recipe(&self) -> String {
        format!("control g : categorical encode=onehot ref={}\n", self.special_level())
    }
}

/// Gaussian controls with dense coefficients `gamma_j = delta_j = scale / sqrt(p)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseAlternative {
    pub n: usize,
    pub p: usize,
    pub scale: f64,
    pub beta: f64,
    pub seed: u64,
}

impl DenseAlternative {
    pub fn new(n: usize, p: usize, seed: u64) -> Self {
        DenseAlternative {
            n,
            p,
            scale: 1.0,
            beta: 0.0,
            seed,
        }
    }

    pub fn controls_matrix(&self) -> Result<DenseMatrix> {
        let mut rng = rng_from_seed(derive_seed(self.seed, u64::MAX));
        DenseMatrix::from_col_major(self.n, self.p, gaussian_vec(&mut rng, self.n * self.p))
    }

    pub fn design(&self) -> Result<DesignMatrix> {
        DesignMatrix::with_intercept(&self.controls_matrix()?)
    }

    /// `W gamma`, which also equals `W delta`.
    pub fn index(&self, w: &DenseMatrix) -> Vec<f64> {
        let c = self.scale / (self.p as f64).sqrt();
        (0..w.rows()).map(|i| c * w.row(i).iter().sum::<f64>()).collect()
    }

    /// One draw of `(Y, D)` given the control index `W gamma`.
    pub fn draw(&self, index: &[f64], rng: &mut Rng) -> (Vec<f64>, Vec<f64>) {
        let n = index.len();
        let mut y = Vec::with_capacity(n);
        let mut d = Vec::with_capacity(n);
        for &wi in index {
            let v: f64 = StandardNormal.sample(rng);
            let u: f64 = StandardNormal.sample(rng);
            let di = wi + v;
            d.push(di);
            y.push(self.beta * di + wi + u);
        }
        (y, d)
    }

    /// One draw as a data table with columns `y`, `d`, `w1..wp`, and the
    /// matching recipe declaring every `w` as continuous.
    pub fn table(&self, rep: u64) -> Result<(DataTable, String)> {
        let w = self.controls_matrix()?;
        let idx = self.index(&w);
        let mut rng = crate::rng::rng_for(self.seed, rep);
        let (y, d) = self.draw(&idx, &mut rng);
        let mut cols = vec![("y".to_string(), y), ("d".to_string(), d)];
        let mut recipe = String::new();
        for j in 0..self.p {
            cols.push((format!("w{}", j + 1), w.column(j).to_vec()));
            recipe.push_str(&format!("control w{} : continuous\n", j + 1));
        }
        Ok((DataTable::from_numeric(cols)?, recipe))
    }
}

/// Independent standard-normal `y`, `d` and controls `w1..wp`, with a recipe.
pub fn gaussian_null_table(n: usize, p: usize, seed: u64) -> Result<(DataTable, String)> {
    let mut rng = rng_from_seed(seed);
    let mut cols = vec![
        ("y".to_string(), gaussian_vec(&mut rng, n)),
        ("d".to_string(), gaussian_vec(&mut rng, n)),
    ];
    let mut recipe = String::new();
    for j in 0..p {
        cols.push((format!("w{}", j + 1), gaussian_vec(&mut rng, n)));
        recipe.push_str(&format!("control w{} : continuous\n", j + 1));
    }
    Ok((DataTable::from_numeric(cols)?, recipe))
}
