//! Python bindings. Structured results come back as plain dicts and lists.

use pyo3::exceptions::{PyArithmeticError, PyValueError};
use pyo3::prelude::*;
use serde::Serialize;

use sparsity_audit::estimators::{self, LassoOptions};
use sparsity_audit::harness::{self, SimulationDesign};
use sparsity_audit::linalg::{self, Clusters, DenseMatrix};
use sparsity_audit::model_spec::{build_design, parse_recipe, DataTable, DesignMatrix, NormalizationChoice};
use sparsity_audit::sparsity_tests::{run_test_battery, BatteryConfig};
use sparsity_audit::theory_lab::{self, ErrorLaw};

fn py_err(e: sparsity_audit::Error) -> PyErr {
    if e.is_input_error() {
        PyValueError::new_err(e.to_string())
    } else {
        PyArithmeticError::new_err(e.to_string())
    }
}

fn to_py<'py, T: Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyValueError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

fn matrix(rows: Vec<Vec<f64>>) -> PyResult<DenseMatrix> {
    DenseMatrix::from_rows(&rows).map_err(py_err)
}

fn clusters(ids: Option<Vec<i64>>) -> Option<Clusters> {
    ids.map(|v| Clusters::from_ids(&v))
}

/// Orthonormal basis of a matrix's column space (rows given as lists).
#[pyclass(module = "sparsity_audit_py")]
struct ProjectionBundle {
    inner: linalg::ProjectionBundle,
}

#[pymethods]
impl ProjectionBundle {
    #[new]
    fn new(rows: Vec<Vec<f64>>) -> PyResult<Self> {
        let inner = linalg::decompose(&matrix(rows)?).map_err(py_err)?;
        Ok(ProjectionBundle { inner })
    }

    #[getter]
    fn rank(&self) -> usize {
        self.inner.rank()
    }

    #[getter]
    fn dropped(&self) -> Vec<usize> {
        self.inner.dropped().to_vec()
    }

    fn leverages(&self) -> Vec<f64> {
        self.inner.leverages()
    }

    fn project(&self, v: Vec<f64>) -> PyResult<Vec<f64>> {
        self.inner.project(&v).map_err(py_err)
    }

    fn annihilate(&self, v: Vec<f64>) -> PyResult<Vec<f64>> {
        self.inner.annihilate(&v).map_err(py_err)
    }

    fn coefficients(&self, y: Vec<f64>) -> PyResult<Vec<f64>> {
        self.inner.coefficients(&y).map_err(py_err)
    }

    fn weighted_offdiag_norm(&self, w: Vec<f64>) -> PyResult<f64> {
        self.inner.weighted_offdiag_norm(&w).map_err(py_err)
    }
}

/// A control design with an unpenalized intercept.
#[pyclass(module = "sparsity_audit_py")]
struct Controls {
    inner: estimators::Controls,
}

#[pymethods]
impl Controls {
    /// Controls from a numeric matrix; an intercept column is prepended.
    #[new]
    fn new(rows: Vec<Vec<f64>>) -> PyResult<Self> {
        let design = DesignMatrix::with_intercept(&matrix(rows)?).map_err(py_err)?;
        Ok(Controls { inner: estimators::Controls::new(design).map_err(py_err)? })
    }

    /// Controls built from a CSV file and a recipe text under the default normalization.
    #[staticmethod]
    fn from_csv(path: &str, recipe: &str) -> PyResult<Self> {
        let table = DataTable::from_csv_path(path).map_err(py_err)?;
        let recipe = parse_recipe(recipe).map_err(py_err)?;
        let design = build_design(&recipe, &table, &NormalizationChoice::default()).map_err(py_err)?;
        Ok(Controls { inner: estimators::Controls::new(design).map_err(py_err)? })
    }

    #[getter]
    fn shape(&self) -> (usize, usize) {
        (self.inner.rows(), self.inner.cols())
    }

    #[getter]
    fn rank(&self) -> usize {
        self.inner.bundle().rank()
    }

    #[pyo3(signature = (y, d, cluster=None))]
    fn ols<'py>(&self, py: Python<'py>, y: Vec<f64>, d: Vec<f64>, cluster: Option<Vec<i64>>) -> PyResult<Bound<'py, PyAny>> {
        let fit = self.inner.ols(&y, &d, clusters(cluster).as_ref()).map_err(py_err)?;
        to_py(py, &fit)
    }

    #[pyo3(signature = (y, d, cluster=None))]
    fn post_double_lasso<'py>(
        &self,
        py: Python<'py>,
        y: Vec<f64>,
        d: Vec<f64>,
        cluster: Option<Vec<i64>>,
    ) -> PyResult<Bound<'py, PyAny>> {
        let fit = estimators::post_double_selection(&y, &d, &self.inner, clusters(cluster).as_ref(), &LassoOptions::default())
            .map_err(py_err)?;
        to_py(py, &fit)
    }

    #[pyo3(signature = (y, d, threshold=estimators::DOUBLE_T_THRESHOLD, cluster=None))]
    fn double_t<'py>(
        &self,
        py: Python<'py>,
        y: Vec<f64>,
        d: Vec<f64>,
        threshold: f64,
        cluster: Option<Vec<i64>>,
    ) -> PyResult<Bound<'py, PyAny>> {
        let fit = estimators::double_t_selection(&y, &d, &self.inner, threshold, clusters(cluster).as_ref())
            .map_err(py_err)?;
        to_py(py, &fit)
    }

    /// Hausman and residual tests as a list of flat records.
    #[pyo3(signature = (y, d, level=0.05, reduced_form=false, cluster=None))]
    fn test_battery<'py>(
        &self,
        py: Python<'py>,
        y: Vec<f64>,
        d: Vec<f64>,
        level: f64,
        reduced_form: bool,
        cluster: Option<Vec<i64>>,
    ) -> PyResult<Bound<'py, PyAny>> {
        let cfg = BatteryConfig { level, include_reduced_form: reduced_form, ..BatteryConfig::default() };
        let b = run_test_battery(&y, &d, &self.inner, clusters(cluster).as_ref(), &cfg).map_err(py_err)?;
        to_py(py, &b.records())
    }
}

#[pyfunction]
#[pyo3(signature = (rows, y, lam, loadings=None))]
fn lasso<'py>(
    py: Python<'py>,
    rows: Vec<Vec<f64>>,
    y: Vec<f64>,
    lam: f64,
    loadings: Option<Vec<f64>>,
) -> PyResult<Bound<'py, PyAny>> {
    let x = matrix(rows)?;
    let loadings = loadings.unwrap_or_else(|| vec![1.0; x.cols()]);
    let fit = estimators::lasso(&x, &y, lam, &loadings, &LassoOptions::default()).map_err(py_err)?;
    to_py(py, &fit)
}

#[pyfunction]
fn efficiency_gain(p_over_n: f64, kappa: f64) -> f64 {
    estimators::efficiency_gain(p_over_n, kappa)
}

#[pyfunction]
#[pyo3(signature = (n, p, reps, level=0.05, seed=1))]
fn simulate_null_size<'py>(
    py: Python<'py>,
    n: usize,
    p: usize,
    reps: usize,
    level: f64,
    seed: u64,
) -> PyResult<Bound<'py, PyAny>> {
    let design = SimulationDesign::gaussian_null(n, p, reps, level, seed);
    let r = py.detach(|| harness::simulate_null_size(&design)).map_err(py_err)?;
    to_py(py, &r)
}

#[pyfunction]
#[pyo3(signature = (p, trials, seed=1))]
fn rotation_rarity<'py>(py: Python<'py>, p: usize, trials: usize, seed: u64) -> PyResult<Bound<'py, PyAny>> {
    let r = py.detach(|| theory_lab::rotation_rarity_experiment(p, trials, seed)).map_err(py_err)?;
    to_py(py, &r)
}

#[pyfunction]
#[pyo3(signature = (p, q=0.5, k_zeros=1, trials=1000, seed=1))]
fn category_experiment<'py>(
    py: Python<'py>,
    p: usize,
    q: f64,
    k_zeros: usize,
    trials: usize,
    seed: u64,
) -> PyResult<Bound<'py, PyAny>> {
    let r = py.detach(|| theory_lab::bernoulli_category_experiment(p, q, k_zeros, trials, seed)).map_err(py_err)?;
    to_py(py, &r)
}

/// `ln c_k^2` for the shifted top Hermite polynomial.
#[pyfunction]
fn hermite_shift(p: usize, lam: f64) -> PyResult<Vec<f64>> {
    Ok(theory_lab::hermite_shift_coeffs(p, lam).map_err(py_err)?.log_coef_sq)
}

#[pyfunction]
#[pyo3(signature = (n, p, reps, law="gaussian", seed=1))]
fn quadratic_form_mc<'py>(
    py: Python<'py>,
    n: usize,
    p: usize,
    reps: usize,
    law: &str,
    seed: u64,
) -> PyResult<Bound<'py, PyAny>> {
    let law: ErrorLaw = law.parse().map_err(py_err)?;
    let r = py.detach(|| theory_lab::quadratic_form_limits_mc(n, p, reps, law, seed)).map_err(py_err)?;
    to_py(py, &r)
}

#[pymodule]
fn sparsity_audit_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<ProjectionBundle>()?;
    m.add_class::<Controls>()?;
    m.add_function(wrap_pyfunction!(lasso, m)?)?;
    m.add_function(wrap_pyfunction!(efficiency_gain, m)?)?;
    m.add_function(wrap_pyfunction!(simulate_null_size, m)?)?;
    m.add_function(wrap_pyfunction!(rotation_rarity, m)?)?;
    m.add_function(wrap_pyfunction!(category_experiment, m)?)?;
    m.add_function(wrap_pyfunction!(hermite_shift, m)?)?;
    m.add_function(wrap_pyfunction!(quadratic_form_mc, m)?)?;
    Ok(())
}
