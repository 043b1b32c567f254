use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{double_t_selection, post_double_selection, Controls, LassoOptions, DOUBLE_T_THRESHOLD};
use crate::linalg::Clusters;
use crate::model_spec::{
    build_design, random_collinearity_resolution, CategoricalEncoding, Centering, DataTable, DesignMatrix,
    NormalizationChoice, Recipe, ReferenceChoice,
};
use crate::rng::{derive_seed, rng_from_seed};
use crate::sparsity_tests::{run_test_battery, BatteryConfig};
use crate::stats::{lower_median, mean, sd};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepKind {
    Collinear,
    Powers,
    CategorySums,
    Offset,
}

impl std::str::FromStr for SweepKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "collinear" => Ok(SweepKind::Collinear),
            "powers" => Ok(SweepKind::Powers),
            "category_sums" | "category-sums" => Ok(SweepKind::CategorySums),
            "offset" => Ok(SweepKind::Offset),
            other => Err(Error::input(format!("unknown sweep kind `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorKind {
    Ols,
    PostDoubleLasso,
    DoubleT,
}

impl EstimatorKind {
    pub fn name(self) -> &'static str {
        match self {
            EstimatorKind::Ols => "ols",
            EstimatorKind::PostDoubleLasso => "post_double_lasso",
            EstimatorKind::DoubleT => "double_t",
        }
    }
}

impl std::str::FromStr for EstimatorKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ols" => Ok(EstimatorKind::Ols),
            "post_double_lasso" | "pdl" | "post-double-lasso" => Ok(EstimatorKind::PostDoubleLasso),
            "double_t" | "double-t" => Ok(EstimatorKind::DoubleT),
            other => Err(Error::input(format!("unknown estimator `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub kind: SweepKind,
    pub n_draws: usize,
    pub seed: u64,
    pub offset_range: (f64, f64),
    pub estimators: Vec<EstimatorKind>,
}

impl SweepConfig {
    pub fn new(kind: SweepKind, n_draws: usize, seed: u64) -> Self {
        SweepConfig {
            kind,
            n_draws,
            seed,
            offset_range: (-1.0, 1.0),
            estimators: vec![EstimatorKind::Ols, EstimatorKind::PostDoubleLasso, EstimatorKind::DoubleT],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_draws == 0 {
            return Err(Error::input("n_draws must be at least 1"));
        }
        let (lo, hi) = self.offset_range;
        if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
            return Err(Error::input("offset range must be finite with lo <= hi"));
        }
        if self.estimators.is_empty() {
            return Err(Error::input("at least one estimator is required"));
        }
        Ok(())
    }

    /// OLS is always fitted so the invariance check can run.
    fn estimators_with_ols(&self) -> Vec<EstimatorKind> {
        let mut e = self.estimators.clone();
        e.push(EstimatorKind::Ols);
        e.sort();
        e.dedup();
        e
    }
}

/// Outcome, treatment and optional cluster column names in a data table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Variables {
    pub outcome: String,
    pub treatment: String,
    pub cluster: Option<String>,
}

struct Prepared {
    y: Vec<f64>,
    d: Vec<f64>,
    clusters: Option<Clusters>,
    /// Table used for design construction (standardized for offset sweeps).
    table: DataTable,
}

fn prepare(data: &DataTable, recipe: &Recipe, vars: &Variables, kind: SweepKind) -> Result<Prepared> {
    recipe.validate()?;
    let y = data.numeric(&vars.outcome)?;
    let d = data.numeric(&vars.treatment)?;
    let clusters = match &vars.cluster {
        Some(c) => Some(Clusters::from_ids(data.text(c)?)),
        None => None,
    };
    let table = if kind == SweepKind::Offset {
        let names: Vec<String> = recipe.hermites().map(|h| h.name.clone()).collect();
        if names.is_empty() {
            return Err(Error::input("an offset sweep needs at least one hermite clause"));
        }
        let mut t = data.clone();
        for name in names {
            let z = data.numeric(&name)?;
            let (m, s) = (mean(&z), sd(&z));
            if !(s > 0.0) {
                return Err(Error::input(format!("`{name}` is constant; cannot standardize")));
            }
            let std: Vec<f64> = z.iter().map(|v| (v - m) / s).collect();
            t = t.with_numeric(&name, &std)?;
        }
        t
    } else {
        data.clone()
    };
    Ok(Prepared { y, d, clusters, table })
}

const CENTERING_MENU: usize = 6;

/// The normalized design for draw `index` of a sweep.
pub fn draw_design(
    table: &DataTable,
    recipe: &Recipe,
    cfg: &SweepConfig,
    index: usize,
) -> Result<DesignMatrix> {
    let seed = derive_seed(cfg.seed, index as u64);
    let mut rng = rng_from_seed(seed);
    let (lo, hi) = cfg.offset_range;
    let uniform = |rng: &mut crate::rng::Rng| if hi > lo { rng.random_range(lo..hi) } else { lo };
    match cfg.kind {
        SweepKind::Collinear => {
            let choice = NormalizationChoice {
                categorical_encoding: Some(CategoricalEncoding::OneHot(ReferenceChoice::None)),
                ..Default::default()
            };
            let full = build_design(recipe, table, &choice)?;
            random_collinearity_resolution(&full, seed)
        }
        SweepKind::Powers => {
            let centering = match rng.random_range(0..CENTERING_MENU) {
                0 => Centering::None,
                1 => Centering::Mean,
                2 => Centering::Median,
                3 => Centering::Range01,
                4 => Centering::Range11,
                _ => Centering::Offset(uniform(&mut rng)),
            };
            let choice = NormalizationChoice {
                centering: Some(centering),
                ..Default::default()
            };
            build_design(recipe, table, &choice)
        }
        SweepKind::CategorySums => {
            let choice = NormalizationChoice {
                categorical_encoding: Some(CategoricalEncoding::Sums(seed)),
                ..Default::default()
            };
            build_design(recipe, table, &choice)
        }
        SweepKind::Offset => {
            let offsets = recipe.hermites().map(|_| uniform(&mut rng)).collect();
            let choice = NormalizationChoice {
                hermite_offsets: Some(offsets),
                ..Default::default()
            };
            build_design(recipe, table, &choice)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DrawEstimate {
    pub draw: usize,
    pub fingerprint: String,
    pub estimator: EstimatorKind,
    pub beta: Option<f64>,
    pub se: Option<f64>,
    /// Failure message when the estimator could not be fitted for this draw.
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorSummary {
    pub estimator: EstimatorKind,
    pub min_beta: f64,
    pub max_beta: f64,
    pub range: f64,
    pub median_se: f64,
    pub range_in_se_units: f64,
    pub draws_ok: usize,
    pub draws_failed: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub config: SweepConfig,
    pub per_draw: Vec<DrawEstimate>,
    pub summary: Vec<EstimatorSummary>,
}

impl SweepResult {
    pub fn summary_for(&self, e: EstimatorKind) -> Option<&EstimatorSummary> {
        self.summary.iter().find(|s| s.estimator == e)
    }

    pub fn betas(&self, e: EstimatorKind) -> Vec<f64> {
        self.per_draw
            .iter()
            .filter(|d| d.estimator == e)
            .filter_map(|d| d.beta)
            .collect()
    }
}

fn fit_one(e: EstimatorKind, y: &[f64], d: &[f64], c: &Controls, cl: Option<&Clusters>) -> Result<(f64, f64)> {
    match e {
        EstimatorKind::Ols => c.ols(y, d, cl).map(|f| (f.beta, f.se)),
        EstimatorKind::PostDoubleLasso => {
            post_double_selection(y, d, c, cl, &LassoOptions::default()).map(|f| (f.beta_star, f.se_star))
        }
        EstimatorKind::DoubleT => double_t_selection(y, d, c, DOUBLE_T_THRESHOLD, cl).map(|f| (f.beta_star, f.se_star)),
    }
}

/// Relative tolerance on the spread of OLS estimates across normalizations.
pub const OLS_INVARIANCE_TOL: f64 = 1e-8;

/// Refits each estimator under `cfg.n_draws` random normalizations.
///
/// Per-draw failures are recorded and do not abort the sweep. Returns an
/// error if the OLS estimate moves by more than the invariance tolerance.
pub fn run_sweep(data: &DataTable, recipe: &Recipe, vars: &Variables, cfg: &SweepConfig) -> Result<SweepResult> {
    cfg.validate()?;
    let prep = prepare(data, recipe, vars, cfg.kind)?;
    let estimators = cfg.estimators_with_ols();
    let per_draw: Vec<Vec<DrawEstimate>> = (0..cfg.n_draws)
        .into_par_iter()
        .map(|i| {
            let built = draw_design(&prep.table, recipe, cfg, i).and_then(|design| {
                let fp = design.choice.fingerprint();
                Controls::new(design).map(|c| (fp, c))
            });
            match built {
                Ok((fingerprint, controls)) => estimators
                    .iter()
                    .map(|&e| {
                        let r = fit_one(e, &prep.y, &prep.d, &controls, prep.clusters.as_ref());
                        DrawEstimate {
                            draw: i,
                            fingerprint: fingerprint.clone(),
                            estimator: e,
                            beta: r.as_ref().ok().map(|x| x.0),
                            se: r.as_ref().ok().map(|x| x.1),
                            error: r.err().map(|e| e.to_string()),
                        }
                    })
                    .collect(),
                Err(err) => estimators
                    .iter()
                    .map(|&e| DrawEstimate {
                        draw: i,
                        fingerprint: String::new(),
                        estimator: e,
                        beta: None,
                        se: None,
                        error: Some(err.to_string()),
                    })
                    .collect(),
            }
        })
        .collect();
    let per_draw: Vec<DrawEstimate> = per_draw.into_iter().flatten().collect();

    let mut summary = Vec::new();
    for &e in &estimators {
        let rows: Vec<&DrawEstimate> = per_draw.iter().filter(|d| d.estimator == e).collect();
        let ok: Vec<(f64, f64)> = rows.iter().filter_map(|d| Some((d.beta?, d.se?))).collect();
        if ok.is_empty() {
            if e == EstimatorKind::Ols {
                let msg = rows.iter().find_map(|d| d.error.clone()).unwrap_or_default();
                return Err(Error::Numerical(format!("OLS failed on every draw: {msg}")));
            }
            continue;
        }
        let betas: Vec<f64> = ok.iter().map(|x| x.0).collect();
        let ses: Vec<f64> = ok.iter().map(|x| x.1).collect();
        let min_beta = betas.iter().copied().fold(f64::INFINITY, f64::min);
        let max_beta = betas.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let range = max_beta - min_beta;
        let median_se = lower_median(&ses);
        if e == EstimatorKind::Ols {
            let median = lower_median(&betas);
            if range > OLS_INVARIANCE_TOL * median.abs() + 1e-12 {
                return Err(Error::InvarianceViolated { range, median });
            }
        }
        summary.push(EstimatorSummary {
            estimator: e,
            min_beta,
            max_beta,
            range,
            median_se,
            range_in_se_units: if median_se > 0.0 { range / median_se } else { 0.0 },
            draws_ok: ok.len(),
            draws_failed: rows.len() - ok.len(),
        });
    }
    Ok(SweepResult {
        config: cfg.clone(),
        per_draw,
        summary,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DrawTests {
    pub draw: usize,
    pub fingerprint: String,
    pub p_values: Vec<(String, f64)>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestRange {
    pub test: String,
    pub min_p: f64,
    pub max_p: f64,
    pub draws_ok: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepTestsResult {
    pub config: SweepConfig,
    pub per_draw: Vec<DrawTests>,
    pub ranges: Vec<TestRange>,
    pub draws_failed: usize,
}

impl SweepTestsResult {
    pub fn range_for(&self, test: &str) -> Option<&TestRange> {
        self.ranges.iter().find(|r| r.test == test)
    }
}

/// Runs the test battery under each random normalization and reports the
/// range of p-values per test.
pub fn sweep_tests(
    data: &DataTable,
    recipe: &Recipe,
    vars: &Variables,
    cfg: &SweepConfig,
    battery: &BatteryConfig,
) -> Result<SweepTestsResult> {
    cfg.validate()?;
    let prep = prepare(data, recipe, vars, cfg.kind)?;
    let per_draw: Vec<DrawTests> = (0..cfg.n_draws)
        .into_par_iter()
        .map(|i| {
            let r = draw_design(&prep.table, recipe, cfg, i).and_then(|design| {
                let fp = design.choice.fingerprint();
                let controls = Controls::new(design)?;
                let b = run_test_battery(&prep.y, &prep.d, &controls, prep.clusters.as_ref(), battery)?;
                Ok((fp, b.p_values()))
            });
            match r {
                Ok((fingerprint, ps)) => DrawTests {
                    draw: i,
                    fingerprint,
                    p_values: ps.into_iter().map(|(t, p)| (t.to_string(), p)).collect(),
                    error: None,
                },
                Err(e) => DrawTests {
                    draw: i,
                    fingerprint: String::new(),
                    p_values: Vec::new(),
                    error: Some(e.to_string()),
                },
            }
        })
        .collect();
    let mut ranges: Vec<TestRange> = Vec::new();
    for d in &per_draw {
        for (t, p) in &d.p_values {
            match ranges.iter_mut().find(|r| &r.test == t) {
                Some(r) => {
                    r.min_p = r.min_p.min(*p);
                    r.max_p = r.max_p.max(*p);
                    r.draws_ok += 1;
                }
                None => ranges.push(TestRange {
                    test: t.clone(),
                    min_p: *p,
                    max_p: *p,
                    draws_ok: 1,
                }),
            }
        }
    }
    let draws_failed = per_draw.iter().filter(|d| d.error.is_some()).count();
    Ok(SweepTestsResult {
        config: cfg.clone(),
        per_draw,
        ranges,
        draws_failed,
    })
}
