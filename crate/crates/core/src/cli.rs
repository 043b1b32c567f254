//! The `sparsity-audit` command line.
//!
//! A `--config` file holds `key = value` lines whose keys are flag names
//! (underscores or hyphens, without the leading dashes). A file value is
//! used only when the same flag is absent from the command line, so flags
//! always win. Boolean keys accept `true`/`false`.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::estimators::{
    double_t_selection, efficiency_report, post_double_selection, Controls, LassoOptions, SbeFit, SbeMethod,
};
use crate::harness::{
    config_hash, null_size_csv, run_sweep, simulate_null_size, svg_histogram, sweep_summary_csv, sweep_tests,
    sweep_tests_csv, to_json, ControlSource, EstimatorKind, SimulationDesign, SweepConfig, SweepKind, Variables,
};
use crate::linalg::Clusters;
use crate::model_spec::{build_design, parse_recipe, DataTable, NormalizationChoice, Recipe};
use crate::sparsity_tests::{run_test_battery, BatteryConfig, TestRecord};
use crate::theory_lab::{
    bernoulli_category_experiment, hermite_shift_coeffs, quadratic_form_limits_mc, rotation_rarity_experiment,
    rotation_rarity_with_s, theory_csv, ErrorLaw, TheoryRow,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 1;
pub const EXIT_NUMERICAL: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "sparsity-audit", version, about = "Audit the sparsity assumption behind lasso-based treatment-effect estimators")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// OLS and a sparsity-based estimator with standard errors and the efficiency report.
    Fit(FitArgs),
    /// Hausman and residual sparsity tests.
    Test(TestArgs),
    /// Refit under random span-preserving normalizations.
    Sweep(SweepArgs),
    /// Null rejection rates of the tests by Monte Carlo.
    Simulate(SimulateArgs),
    /// Rarity-of-sparsity and quadratic-form experiments.
    Theory(TheoryArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum MethodArg {
    PostDoubleLasso,
    DoubleT,
}

impl From<MethodArg> for SbeMethod {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::PostDoubleLasso => SbeMethod::PostDoubleLasso,
            MethodArg::DoubleT => SbeMethod::DoubleT,
        }
    }
}

#[derive(Debug, Args, Serialize)]
struct Common {
    /// `key = value` file supplying defaults for any flag.
    #[arg(long, value_name = "PATH")]
    #[serde(skip)]
    config: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Directory receiving the output files.
    #[arg(long, value_name = "DIR", default_value = ".")]
    #[serde(skip)]
    output_dir: PathBuf,
    /// Output format (each subcommand has its own default).
    #[arg(long, value_enum)]
    format: Option<Format>,
    /// Worker threads (default: available parallelism).
    #[arg(long)]
    #[serde(skip)]
    threads: Option<usize>,
}

#[derive(Debug, Args, Serialize)]
struct DataArgs {
    /// CSV file with a header row.
    #[arg(long, value_name = "PATH")]
    data: PathBuf,
    /// Recipe file describing the controls.
    #[arg(long, value_name = "PATH")]
    recipe: PathBuf,
    #[arg(long)]
    outcome: String,
    #[arg(long)]
    treatment: String,
    /// Column of cluster identifiers for clustered standard errors.
    #[arg(long)]
    cluster: Option<String>,
}

#[derive(Debug, Args, Serialize)]
struct MethodArgs {
    #[arg(long, value_enum, default_value = "post-double-lasso")]
    method: MethodArg,
    #[arg(long, default_value_t = crate::estimators::DOUBLE_T_THRESHOLD)]
    double_t_threshold: f64,
}

#[derive(Debug, Args, Serialize)]
struct FitArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    method: MethodArgs,
}

#[derive(Debug, Args, Serialize)]
struct TestArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    method: MethodArgs,
    #[arg(long, default_value_t = 0.05)]
    level: f64,
    /// Also run the reduced-form residual test.
    #[arg(long)]
    reduced_form: bool,
}

#[derive(Debug, Args, Serialize)]
struct SweepArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    data: DataArgs,
    /// collinear, powers, category-sums or offset.
    #[arg(long)]
    kind: String,
    #[arg(long, default_value_t = 100)]
    draws: usize,
    /// Run the test battery per draw instead of the estimators.
    #[arg(long)]
    with_tests: bool,
    #[arg(long, value_enum, default_value = "post-double-lasso")]
    method: MethodArg,
    #[arg(long, default_value_t = 0.05)]
    level: f64,
    /// Comma-separated estimators (ols, post_double_lasso, double_t).
    #[arg(long, value_delimiter = ',')]
    estimators: Option<Vec<String>>,
    #[arg(long, default_value_t = -1.0, allow_hyphen_values = true)]
    offset_lo: f64,
    #[arg(long, default_value_t = 1.0, allow_hyphen_values = true)]
    offset_hi: f64,
    /// Also write SVG histograms of the per-draw results.
    #[arg(long)]
    svg: bool,
}

#[derive(Debug, Args, Serialize)]
struct SimulateArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, default_value_t = 400)]
    n: usize,
    #[arg(long, default_value_t = 120)]
    p: usize,
    #[arg(long, default_value_t = 2000)]
    reps: usize,
    #[arg(long, default_value_t = 0.05)]
    level: f64,
    #[arg(long, default_value_t = 1.0)]
    sigma_y: f64,
    #[arg(long, default_value_t = 1.0)]
    sigma_d: f64,
    #[arg(long, value_enum, default_value = "post-double-lasso")]
    method: MethodArg,
    #[arg(long)]
    reduced_form: bool,
    /// Use the controls of this dataset (with --recipe) instead of Gaussian ones.
    #[arg(long, value_name = "PATH", requires = "recipe")]
    data: Option<PathBuf>,
    #[arg(long, value_name = "PATH", requires = "data")]
    recipe: Option<PathBuf>,
    /// Write an SVG histogram of the Hausman p-values.
    #[arg(long)]
    svg: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum Experiment {
    Rotation,
    Categories,
    Hermite,
    Qf,
}

#[derive(Debug, Args, Serialize)]
struct TheoryArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, value_enum)]
    experiment: Experiment,
    /// Dimension (defaults: rotation 64, categories 16, hermite 10000, qf 300).
    #[arg(long)]
    p: Option<usize>,
    /// Sample size for the quadratic-form experiment.
    #[arg(long, default_value_t = 1000)]
    n: usize,
    /// Monte Carlo trials (defaults: rotation 10000, categories 2000, qf 1000).
    #[arg(long)]
    trials: Option<usize>,
    /// Sparsity level for the rotation experiment.
    #[arg(long)]
    s: Option<usize>,
    #[arg(long, default_value_t = 0.5)]
    q: f64,
    /// Number of zeros in the true category effect.
    #[arg(long, default_value_t = 1)]
    k_zeros: usize,
    /// Hermite shift.
    #[arg(long, allow_hyphen_values = true)]
    lambda: Option<f64>,
    /// Use the shift 1/ln(p)^k with k = --lambda-log-power.
    #[arg(long)]
    lambda_log: bool,
    #[arg(long, default_value_t = 1)]
    lambda_log_power: i32,
    /// gaussian, t8 or hetero.
    #[arg(long, default_value = "gaussian")]
    law: String,
}

/// Parses `argv` (program name first), runs the subcommand and returns the exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString>,
{
    let argv: Vec<OsString> = argv.into_iter().map(Into::into).collect();
    let argv = match splice_config(argv) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_INPUT;
        }
    };
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_input_error() {
                EXIT_INPUT
            } else {
                EXIT_NUMERICAL
            }
        }
    }
}

fn find_config(args: &[OsString]) -> Option<PathBuf> {
    let mut it = args.iter();
    while let Some(a) = it.next() {
        let s = a.to_string_lossy();
        if s == "--config" {
            return it.next().map(PathBuf::from);
        }
        if let Some(rest) = s.strip_prefix("--config=") {
            return Some(PathBuf::from(rest));
        }
    }
    None
}

/// Parses `key = value` lines into `(flag, value)` pairs; boolean keys carry
/// no value and are dropped when false. `#` starts a comment.
pub fn config_to_args(text: &str) -> Result<Vec<(String, Option<String>)>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(Error::Input(format!("config line {}: expected `key = value`", i + 1)));
        };
        let key = key.trim().replace('_', "-");
        let value = value.trim();
        if key.is_empty() || key == "config" {
            return Err(Error::Input(format!("config line {}: invalid key", i + 1)));
        }
        let flag = format!("--{key}");
        if is_bool_flag(&key) {
            match value {
                "true" | "1" | "yes" => out.push((flag, None)),
                "false" | "0" | "no" => {}
                _ => return Err(Error::Input(format!("config line {}: `{key}` expects true or false", i + 1))),
            }
        } else {
            out.push((flag, Some(value.to_string())));
        }
    }
    Ok(out)
}

fn is_bool_flag(key: &str) -> bool {
    matches!(key, "with-tests" | "svg" | "reduced-form" | "lambda-log")
}

fn splice_config(argv: Vec<OsString>) -> Result<Vec<OsString>> {
    let Some(path) = find_config(&argv) else { return Ok(argv) };
    let text = std::fs::read_to_string(&path)
        .map_err(|e| Error::Input(format!("cannot read config `{}`: {e}", path.display())))?;
    let given: Vec<String> = argv
        .iter()
        .filter_map(|a| a.to_str())
        .filter(|a| a.starts_with("--"))
        .map(|a| a.split('=').next().unwrap_or(a).to_string())
        .collect();
    // Program name and subcommand come first; flags on the command line win.
    let split = argv.len().min(2);
    let mut out: Vec<OsString> = argv[..split].to_vec();
    for (flag, value) in config_to_args(&text)? {
        if given.contains(&flag) {
            continue;
        }
        out.push(flag.into());
        if let Some(v) = value {
            out.push(v.into());
        }
    }
    out.extend(argv[split..].iter().cloned());
    Ok(out)
}

fn execute(cli: Cli) -> Result<()> {
    let threads = match &cli.command {
        Command::Fit(a) => a.common.threads,
        Command::Test(a) => a.common.threads,
        Command::Sweep(a) => a.common.threads,
        Command::Simulate(a) => a.common.threads,
        Command::Theory(a) => a.common.threads,
    };
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(t) = threads {
        if t == 0 {
            return Err(Error::Input("--threads must be at least 1".into()));
        }
        builder = builder.num_threads(t);
    }
    let pool = builder.build().map_err(|e| Error::Numerical(format!("thread pool: {e}")))?;
    pool.install(|| match cli.command {
        Command::Fit(a) => cmd_fit(&a),
        Command::Test(a) => cmd_test(&a),
        Command::Sweep(a) => cmd_sweep(&a),
        Command::Simulate(a) => cmd_simulate(&a),
        Command::Theory(a) => cmd_theory(&a),
    })
}

/// Output file stem `<subcommand>-<hash>` for a serializable configuration.
fn stem<T: Serialize>(name: &str, config: &T) -> Result<String> {
    let canonical = serde_json::to_string(config).map_err(|e| Error::Numerical(e.to_string()))?;
    Ok(format!("{name}-{}", config_hash(&canonical)))
}

fn write_output(dir: &Path, file: &str, contents: &str) -> Result<PathBuf> {
    std::fs::create_dir_all(dir)?;
    let path = dir.join(file);
    std::fs::write(&path, contents)?;
    eprintln!("wrote {}", path.display());
    Ok(path)
}

fn emit(common: &Common, stem: &str, default: Format, json: impl FnOnce() -> Result<String>, csv: impl FnOnce() -> Result<String>) -> Result<()> {
    let (ext, body) = match common.format.unwrap_or(default) {
        Format::Json => ("json", json()?),
        Format::Csv => ("csv", csv()?),
    };
    write_output(&common.output_dir, &format!("{stem}.{ext}"), &body)?;
    // A closed pipe on stdout is not an error; the file is already written.
    let _ = std::io::stdout().write_all(body.as_bytes());
    Ok(())
}

fn csv_rows(header: &[&str], rows: Vec<Vec<String>>) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Input(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

struct Loaded {
    table: DataTable,
    recipe: Recipe,
    vars: Variables,
}

fn existing(path: &Path, what: &str) -> Result<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(Error::Input(format!("{what} file `{}` does not exist", path.display())))
    }
}

fn load(a: &DataArgs) -> Result<Loaded> {
    existing(&a.data, "data")?;
    existing(&a.recipe, "recipe")?;
    let table = DataTable::from_csv_path(&a.data)?;
    let recipe = parse_recipe(&std::fs::read_to_string(&a.recipe)?)?;
    let vars = Variables { outcome: a.outcome.clone(), treatment: a.treatment.clone(), cluster: a.cluster.clone() };
    Ok(Loaded { table, recipe, vars })
}

struct Problem {
    y: Vec<f64>,
    d: Vec<f64>,
    clusters: Option<Clusters>,
    controls: Controls,
}

fn problem(l: &Loaded) -> Result<Problem> {
    let y = l.table.numeric(&l.vars.outcome)?;
    let d = l.table.numeric(&l.vars.treatment)?;
    let clusters = match &l.vars.cluster {
        Some(c) => Some(Clusters::from_ids(l.table.text(c)?)),
        None => None,
    };
    let design = build_design(&l.recipe, &l.table, &NormalizationChoice::default())?;
    Ok(Problem { y, d, clusters, controls: Controls::new(design)? })
}

fn fit_sbe(p: &Problem, m: &MethodArgs) -> Result<SbeFit> {
    match m.method {
        MethodArg::PostDoubleLasso => {
            post_double_selection(&p.y, &p.d, &p.controls, p.clusters.as_ref(), &LassoOptions::default())
        }
        MethodArg::DoubleT => double_t_selection(&p.y, &p.d, &p.controls, m.double_t_threshold, p.clusters.as_ref()),
    }
}

fn column_names(controls: &Controls, idx: &[usize]) -> Vec<String> {
    let prov = &controls.design().provenance;
    idx.iter().map(|&j| format!("{}:{}", prov[j].source, prov[j].transform)).collect()
}

#[derive(Serialize)]
struct EstimateBlock {
    beta: f64,
    se: f64,
    clustered: bool,
}

#[derive(Serialize)]
struct SbeBlock {
    method: SbeMethod,
    beta: f64,
    se: f64,
    selected: Vec<String>,
    selected_outcome: Vec<String>,
    selected_propensity: Vec<String>,
    degenerate: bool,
}

#[derive(Serialize)]
struct FitReport {
    n: usize,
    controls: usize,
    ols: EstimateBlock,
    sbe: SbeBlock,
    efficiency: crate::estimators::EfficiencyReport,
}

fn cmd_fit(a: &FitArgs) -> Result<()> {
    let loaded = load(&a.data)?;
    let p = problem(&loaded)?;
    let ols = p.controls.ols(&p.y, &p.d, p.clusters.as_ref())?;
    let sbe = fit_sbe(&p, &a.method)?;
    let n = p.controls.rows();
    let rank = p.controls.bundle().rank();
    let report = FitReport {
        n,
        controls: rank,
        ols: EstimateBlock { beta: ols.beta, se: ols.se, clustered: ols.clustered() },
        sbe: SbeBlock {
            method: sbe.method,
            beta: sbe.beta_star,
            se: sbe.se_star,
            selected: column_names(&p.controls, &sbe.selected_union),
            selected_outcome: column_names(&p.controls, &sbe.selected_outcome),
            selected_propensity: column_names(&p.controls, &sbe.selected_propensity),
            degenerate: sbe.degenerate,
        },
        efficiency: efficiency_report(&ols, n, rank, None)?,
    };
    let stem = stem("fit", a)?;
    emit(
        &a.common,
        &stem,
        Format::Json,
        || to_json(&report),
        || {
            csv_rows(
                &["estimator", "beta", "se"],
                vec![
                    vec!["ols".into(), report.ols.beta.to_string(), report.ols.se.to_string()],
                    vec![report.sbe.method.to_string(), report.sbe.beta.to_string(), report.sbe.se.to_string()],
                ],
            )
        },
    )
}

fn opt_num(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn records_csv(records: &[TestRecord]) -> Result<String> {
    let rows = records
        .iter()
        .map(|r| {
            vec![
                r.test.clone(),
                r.target.clone(),
                r.statistic.to_string(),
                opt_num(r.bias_term),
                r.var_term.to_string(),
                r.z.to_string(),
                r.p.to_string(),
                r.clustered.to_string(),
                r.degenerate.to_string(),
            ]
        })
        .collect();
    csv_rows(&["test", "target", "statistic", "bias_term", "var_term", "z", "p", "clustered", "degenerate"], rows)
}

fn cmd_test(a: &TestArgs) -> Result<()> {
    let loaded = load(&a.data)?;
    let p = problem(&loaded)?;
    let cfg = BatteryConfig {
        level: a.level,
        method: a.method.method.into(),
        include_reduced_form: a.reduced_form,
        double_t_threshold: a.method.double_t_threshold,
        ..BatteryConfig::default()
    };
    let battery = run_test_battery(&p.y, &p.d, &p.controls, p.clusters.as_ref(), &cfg)?;
    let records = battery.records();
    let stem = stem("test", a)?;
    emit(&a.common, &stem, Format::Json, || to_json(&records), || records_csv(&records))
}

fn cmd_sweep(a: &SweepArgs) -> Result<()> {
    let kind: SweepKind = a.kind.parse()?;
    let loaded = load(&a.data)?;
    let mut cfg = SweepConfig::new(kind, a.draws, a.common.seed);
    cfg.offset_range = (a.offset_lo, a.offset_hi);
    if let Some(list) = &a.estimators {
        cfg.estimators = list.iter().map(|s| s.trim().parse()).collect::<Result<Vec<EstimatorKind>>>()?;
    }
    let stem = stem("sweep", a)?;
    if a.with_tests {
        let battery = BatteryConfig { level: a.level, method: a.method.into(), ..BatteryConfig::default() };
        let r = sweep_tests(&loaded.table, &loaded.recipe, &loaded.vars, &cfg, &battery)?;
        if a.svg {
            for range in &r.ranges {
                let ps: Vec<f64> = r
                    .per_draw
                    .iter()
                    .filter_map(|d| d.p_values.iter().find(|(t, _)| *t == range.test).map(|x| x.1))
                    .collect();
                let svg = svg_histogram(&ps, 20, &format!("{} p-values across draws", range.test));
                write_output(&a.common.output_dir, &format!("{stem}-{}.svg", range.test), &svg)?;
            }
        }
        emit(&a.common, &stem, Format::Csv, || to_json(&r), || sweep_tests_csv(&r))
    } else {
        let r = run_sweep(&loaded.table, &loaded.recipe, &loaded.vars, &cfg)?;
        if a.svg {
            for s in &r.summary {
                let svg = svg_histogram(&r.betas(s.estimator), 20, &format!("{} estimates across draws", s.estimator.name()));
                write_output(&a.common.output_dir, &format!("{stem}-{}.svg", s.estimator.name()), &svg)?;
            }
        }
        emit(&a.common, &stem, Format::Csv, || to_json(&r), || sweep_summary_csv(&r))
    }
}

fn cmd_simulate(a: &SimulateArgs) -> Result<()> {
    let mut design = SimulationDesign::gaussian_null(a.n, a.p, a.reps, a.level, a.common.seed);
    design.sigma_y = a.sigma_y;
    design.sigma_d = a.sigma_d;
    design.method = a.method.into();
    design.include_reduced_form = a.reduced_form;
    if let (Some(data), Some(recipe)) = (&a.data, &a.recipe) {
        existing(data, "data")?;
        existing(recipe, "recipe")?;
        let table = DataTable::from_csv_path(data)?;
        let recipe = parse_recipe(&std::fs::read_to_string(recipe)?)?;
        let built = build_design(&recipe, &table, &NormalizationChoice::default())?;
        design.n = built.rows();
        design.p = built.cols();
        design.w_source = ControlSource::Design(built);
    }
    let r = simulate_null_size(&design)?;
    let stem = stem("simulate", a)?;
    if a.svg {
        if let Some(ps) = r.p_values_for("H") {
            let svg = svg_histogram(ps, 20, "Hausman p-values under the null");
            write_output(&a.common.output_dir, &format!("{stem}-H.svg"), &svg)?;
        }
    }
    emit(&a.common, &stem, Format::Csv, || to_json(&r), || null_size_csv(&r))
}

fn cmd_theory(a: &TheoryArgs) -> Result<()> {
    let seed = a.common.seed;
    let rows: Vec<TheoryRow> = match a.experiment {
        Experiment::Rotation => {
            let p = a.p.unwrap_or(64);
            let trials = a.trials.unwrap_or(10_000);
            let r = match a.s {
                Some(s) => rotation_rarity_with_s(p, s, trials, seed)?,
                None => rotation_rarity_experiment(p, trials, seed)?,
            };
            r.rows()
        }
        Experiment::Categories => {
            let p = a.p.unwrap_or(16);
            bernoulli_category_experiment(p, a.q, a.k_zeros, a.trials.unwrap_or(2000), seed)?.rows()
        }
        Experiment::Hermite => {
            let p = a.p.unwrap_or(10_000);
            let lambda = match (a.lambda, a.lambda_log) {
                (Some(_), true) => return Err(Error::Input("give either --lambda or --lambda-log".into())),
                (Some(l), false) => l,
                (None, true) => {
                    if p < 2 {
                        return Err(Error::Input("p must be at least 2".into()));
                    }
                    (p as f64).ln().powi(a.lambda_log_power).recip()
                }
                (None, false) => return Err(Error::Input("the hermite experiment needs --lambda or --lambda-log".into())),
            };
            let h = hermite_shift_coeffs(p, lambda)?;
            let mut rows = h.summary_rows();
            rows.extend(h.rows());
            rows
        }
        Experiment::Qf => {
            let law: ErrorLaw = a.law.parse()?;
            let p = a.p.unwrap_or(300);
            quadratic_form_limits_mc(a.n, p, a.trials.unwrap_or(1000), law, seed)?.rows()
        }
    };
    let stem = stem("theory", a)?;
    emit(&a.common, &stem, Format::Csv, || to_json(&rows), || theory_csv(&rows))
}
