//! Python bindings. Matrices cross the boundary as lists of rows; reports
//! come back as plain dicts.

use lp_coreset::conditioning::{certify_basis, well_conditioned_basis};
use lp_coreset::io::{from_json, to_json};
use lp_coreset::pipeline::{self, ExactBaseline, NoiseModel, Variant};
use lp_coreset::solver::{solve_lp_regression, SolverOptions};
use lp_coreset::DenseMatrix;
use pyo3::create_exception;
use pyo3::exceptions::PyException;
use pyo3::prelude::*;
use serde::de::DeserializeOwned;
use serde::Serialize;

create_exception!(lp_coreset_py, LpCoresetError, PyException);

fn err(e: lp_coreset::Error) -> PyErr {
    LpCoresetError::new_err(e.to_string())
}

fn matrix(rows: Vec<Vec<f64>>) -> PyResult<DenseMatrix> {
    DenseMatrix::from_rows(&rows).map_err(err)
}

fn rows_of(m: &DenseMatrix) -> Vec<Vec<f64>> {
    (0..m.rows()).map(|i| m.row(i).to_vec()).collect()
}

fn to_dict<'py, T: Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = to_json(value).map_err(err)?;
    py.import("json")?.call_method1("loads", (text,))
}

fn keyword<T: DeserializeOwned>(name: &str) -> PyResult<T> {
    from_json(&format!("\"{name}\"")).map_err(|_| LpCoresetError::new_err(format!("unknown option {name:?}")))
}

/// An lp regression problem `min ||A x - b||_p`, optionally weighted.
#[pyclass(module = "lp_coreset_py", from_py_object)]
#[derive(Clone)]
struct RegressionInstance {
    inner: pipeline::RegressionInstance,
}

#[pymethods]
impl RegressionInstance {
    /// `b` is a list of floats, or a list of rows for several right-hand sides.
    #[new]
    #[pyo3(signature = (a, b, p, weights=None))]
    fn new(a: Vec<Vec<f64>>, b: &Bound<'_, PyAny>, p: f64, weights: Option<Vec<f64>>) -> PyResult<Self> {
        let a = matrix(a)?;
        let inner = if let Ok(v) = b.extract::<Vec<f64>>() {
            pipeline::RegressionInstance::new(a, v, p)
        } else {
            pipeline::RegressionInstance::generalized(a, matrix(b.extract()?)?, p)
        }
        .map_err(err)?;
        let inner = match weights {
            Some(w) => inner.with_weights(w).map_err(err)?,
            None => inner,
        };
        Ok(Self { inner })
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n()
    }

    #[getter]
    fn m(&self) -> usize {
        self.inner.m()
    }

    #[getter]
    fn d(&self) -> usize {
        self.inner.d()
    }

    #[getter]
    fn p(&self) -> f64 {
        self.inner.p()
    }

    #[getter]
    fn a(&self) -> Vec<Vec<f64>> {
        rows_of(self.inner.a())
    }

    #[getter]
    fn b(&self) -> Vec<Vec<f64>> {
        rows_of(self.inner.b())
    }

    fn __repr__(&self) -> String {
        format!(
            "RegressionInstance(n={}, m={}, d={}, p={}, k={})",
            self.inner.n(),
            self.inner.m(),
            self.inner.d(),
            self.inner.p(),
            self.inner.rhs_cols()
        )
    }
}

#[pyclass(module = "lp_coreset_py", from_py_object)]
#[derive(Clone)]
struct PipelineConfig {
    inner: pipeline::PipelineConfig,
}

#[pymethods]
impl PipelineConfig {
    #[new]
    #[pyo3(signature = (epsilon=0.1, r1_scale=1.0, r2_scale=1.0, stages=2, exact="auto"))]
    fn new(epsilon: f64, r1_scale: f64, r2_scale: f64, stages: u8, exact: &str) -> PyResult<Self> {
        let inner = pipeline::PipelineConfig {
            epsilon,
            stages,
            exact: keyword::<ExactBaseline>(exact)?,
            ..pipeline::PipelineConfig::default().with_scales(r1_scale, r2_scale)
        };
        inner.validate().map_err(err)?;
        Ok(Self { inner })
    }

    fn to_dict<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_dict(py, &self.inner)
    }
}

/// Runs one pipeline variant and returns its report as a dict.
#[pyfunction]
#[pyo3(signature = (instance, config=None, seed=0, variant="two-stage"))]
fn solve<'py>(
    py: Python<'py>,
    instance: &RegressionInstance,
    config: Option<PipelineConfig>,
    seed: u64,
    variant: &str,
) -> PyResult<Bound<'py, PyAny>> {
    let cfg = config.map(|c| c.inner).unwrap_or_default();
    let variant = keyword::<Variant>(variant)?;
    let report = py.detach(|| pipeline::run_variant(&instance.inner, &cfg, seed, variant));
    to_dict(py, &report)
}

#[pyfunction]
#[pyo3(signature = (instance, config=None, n_seeds=100, base_seed=0))]
fn lemma_statistics<'py>(
    py: Python<'py>,
    instance: &RegressionInstance,
    config: Option<PipelineConfig>,
    n_seeds: usize,
    base_seed: u64,
) -> PyResult<Bound<'py, PyAny>> {
    let cfg = config.map(|c| c.inner).unwrap_or_default();
    let stats = py
        .detach(|| pipeline::lemma_statistics(&instance.inner, &cfg, n_seeds, base_seed))
        .map_err(err)?;
    to_dict(py, &stats)
}

/// Returns `(instance, x_star, corrupted_rows)` from the reference family.
#[pyfunction]
#[pyo3(signature = (n, d, p, rho=0.1, noise="gaussian", seed=0))]
fn reference_instance(
    n: usize,
    d: usize,
    p: f64,
    rho: f64,
    noise: &str,
    seed: u64,
) -> PyResult<(RegressionInstance, Vec<f64>, Vec<usize>)> {
    let r = pipeline::reference_instance(n, d, p, rho, keyword::<NoiseModel>(noise)?, seed).map_err(err)?;
    Ok((RegressionInstance { inner: r.instance }, r.x_star, r.corrupted))
}

/// Well-conditioned basis of the column space of `a`, with certificates.
#[pyfunction]
#[pyo3(signature = (a, p, tol=lp_coreset::conditioning::DEFAULT_TOL, probes=0, seed=0))]
fn condition<'py>(py: Python<'py>, a: Vec<Vec<f64>>, p: f64, tol: f64, probes: usize, seed: u64) -> PyResult<Bound<'py, PyAny>> {
    let a = matrix(a)?;
    let w = py.detach(|| well_conditioned_basis(&a, p, tol)).map_err(err)?;
    let out = pyo3::types::PyDict::new(py);
    out.set_item("u", rows_of(&w.u))?;
    out.set_item("tau", rows_of(&w.tau))?;
    out.set_item("alpha_cert", w.alpha_cert)?;
    out.set_item("beta_cert", w.beta_cert)?;
    out.set_item("kappa", w.kappa_cert)?;
    out.set_item("converged", w.converged)?;
    out.set_item("warnings", w.warnings.clone())?;
    if probes > 0 {
        let (alpha, beta) = certify_basis(&w, probes, seed).map_err(err)?;
        out.set_item("alpha_measured", alpha)?;
        out.set_item("beta_measured_lower", beta)?;
    }
    Ok(out.into_any())
}

/// Full lp regression; returns `(x, objective)`.
#[pyfunction]
fn lp_regression(py: Python<'_>, a: Vec<Vec<f64>>, b: Vec<f64>, p: f64) -> PyResult<(Vec<f64>, f64)> {
    let a = matrix(a)?;
    let r = py
        .detach(|| solve_lp_regression(&a, &b, p, &SolverOptions::default()))
        .map_err(err)?;
    Ok((r.x, r.objective))
}

#[pymodule]
fn lp_coreset_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("LpCoresetError", m.py().get_type::<LpCoresetError>())?;
    m.add_class::<RegressionInstance>()?;
    m.add_class::<PipelineConfig>()?;
    m.add_function(wrap_pyfunction!(solve, m)?)?;
    m.add_function(wrap_pyfunction!(lemma_statistics, m)?)?;
    m.add_function(wrap_pyfunction!(reference_instance, m)?)?;
    m.add_function(wrap_pyfunction!(condition, m)?)?;
    m.add_function(wrap_pyfunction!(lp_regression, m)?)?;
    Ok(())
}
