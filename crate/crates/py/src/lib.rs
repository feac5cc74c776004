use pyo3::create_exception;
use pyo3::exceptions::PyException;
use pyo3::prelude::*;
use pyo3::types::PyDict;

use rwre_core::config::ExperimentConfig;
use rwre_core::limit_laws::{self, StableLaw};
use rwre_core::occupancy::{self, RhoOptions};
use rwre_core::traps;
use rwre_core::verify::{Status, Verifier};
use rwre_core::walk::{Regime, Sampler, WalkOptions, WalkSetup};

create_exception!(rwre_lab, RwreError, PyException);

fn py_err(e: rwre_core::Error) -> PyErr {
    RwreError::new_err(e.to_string())
}

fn parse_regime(name: &str) -> PyResult<Regime> {
    match name {
        "sub" => Ok(Regime::Sub),
        "critical" => Ok(Regime::Critical),
        "super" => Ok(Regime::Super),
        "gaussian" => Ok(Regime::Gaussian),
        other => Err(RwreError::new_err(format!("unknown regime {other:?}"))),
    }
}

fn parse_sampler(name: &str) -> PyResult<Sampler> {
    match name {
        "direct" => Ok(Sampler::Direct),
        "crossings" => Ok(Sampler::Crossings),
        other => Err(RwreError::new_err(format!("unknown sampler {other:?}"))),
    }
}

/// Law of the site probabilities `p`.
#[pyclass(frozen, name = "EnvironmentModel")]
struct PyModel {
    inner: rwre_core::EnvironmentModel,
}

#[pymethods]
impl PyModel {
    #[staticmethod]
    #[pyo3(signature = (alpha_a, alpha_b, w, eps0=None))]
    fn two_point_alpha(alpha_a: f64, alpha_b: f64, w: f64, eps0: Option<f64>) -> PyResult<Self> {
        let inner = rwre_core::EnvironmentModel::two_point_alpha(alpha_a, alpha_b, w, eps0).map_err(py_err)?;
        Ok(PyModel { inner })
    }

    #[staticmethod]
    #[pyo3(signature = (p_a, p_b, w, eps0=None))]
    fn two_point(p_a: f64, p_b: f64, w: f64, eps0: Option<f64>) -> PyResult<Self> {
        let inner = rwre_core::EnvironmentModel::two_point(p_a, p_b, w, eps0).map_err(py_err)?;
        Ok(PyModel { inner })
    }

    #[staticmethod]
    fn scaled_beta(a: f64, b: f64, eps0: f64) -> PyResult<Self> {
        let inner = rwre_core::EnvironmentModel::scaled_beta(a, b, eps0).map_err(py_err)?;
        Ok(PyModel { inner })
    }

    fn tail_index(&self) -> PyResult<f64> {
        self.inner.tail_index().map_err(py_err)
    }

    fn mean_rho(&self) -> Option<f64> {
        self.inner.mean_rho()
    }

    fn sample(&self, lo: i64, hi: i64, seed: u64) -> PyResult<PyEnvironment> {
        let inner = rwre_core::sample_environment(&self.inner, lo, hi, seed).map_err(py_err)?;
        Ok(PyEnvironment { inner })
    }

    fn __repr__(&self) -> String {
        format!("EnvironmentModel({:?})", self.inner.spec())
    }
}

/// A window of sampled site probabilities.
#[pyclass(frozen, name = "Environment")]
struct PyEnvironment {
    inner: rwre_core::Environment,
}

#[pymethods]
impl PyEnvironment {
    #[staticmethod]
    fn from_values(offset: i64, p: Vec<f64>) -> PyResult<Self> {
        Ok(PyEnvironment { inner: rwre_core::Environment::from_values(offset, p).map_err(py_err)? })
    }

    fn values(&self) -> Vec<f64> {
        self.inner.values().to_vec()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    /// `rho_n` and `z_n` on `[0, n + lookahead)`.
    #[pyo3(signature = (n, tol=1e-10, lookahead=0))]
    fn rho(&self, n: usize, tol: f64, lookahead: usize) -> PyResult<PyProfile> {
        let opts = RhoOptions { tol, lookahead, ..RhoOptions::default() };
        let inner = occupancy::compute_rho_with(&self.inner, n, &opts).map_err(py_err)?;
        Ok(PyProfile { inner })
    }

    /// One trajectory from 0; returns a dict of its occupation statistics.
    #[pyo3(signature = (n, seed, sampler="crossings", step_budget=1_000_000_000))]
    fn walk<'py>(
        &self,
        py: Python<'py>,
        n: usize,
        seed: u64,
        sampler: &str,
        step_budget: u64,
    ) -> PyResult<Bound<'py, PyDict>> {
        let sampler = parse_sampler(sampler)?;
        let opts = WalkOptions { step_budget, ..WalkOptions::default() };
        let o =
            py.detach(|| WalkSetup::new(&self.inner, n, opts).and_then(|s| s.run(sampler, seed))).map_err(py_err)?;
        let d = PyDict::new(py);
        d.set_item("t_n", o.t_n)?;
        d.set_item("t_tilde", o.t_tilde)?;
        d.set_item("xi_star", o.xi_star)?;
        d.set_item("xi", o.xi)?;
        d.set_item("truncated", o.truncated)?;
        Ok(d)
    }
}

#[pyclass(frozen, name = "RhoProfile")]
struct PyProfile {
    inner: rwre_core::RhoProfile,
}

#[pymethods]
impl PyProfile {
    #[getter]
    fn n(&self) -> usize {
        self.inner.n
    }

    #[getter]
    fn rho(&self) -> Vec<f64> {
        self.inner.rho.clone()
    }

    #[getter]
    fn z(&self) -> Vec<f64> {
        self.inner.z.clone()
    }

    fn total(&self) -> f64 {
        self.inner.total()
    }

    /// Clusters at threshold `delta N^{1/s}`; `span` overrides the look-ahead.
    #[pyo3(signature = (s, delta, span=None))]
    fn clusters<'py>(
        &self,
        py: Python<'py>,
        s: f64,
        delta: f64,
        span: Option<usize>,
    ) -> PyResult<Vec<Bound<'py, PyDict>>> {
        let span = span.unwrap_or_else(|| traps::cluster_span(self.inner.n));
        let sample = traps::detect_clusters_with(&self.inner, s, delta, span).map_err(py_err)?;
        sample
            .clusters
            .iter()
            .map(|c| {
                let d = PyDict::new(py);
                d.set_item("n", c.n)?;
                d.set_item("t", c.t)?;
                d.set_item("a", c.a)?;
                d.set_item("b", c.b)?;
                d.set_item("m", c.m)?;
                d.set_item("theta", c.theta)?;
                d.set_item("clipped", c.clipped)?;
                Ok(d)
            })
            .collect()
    }
}

/// CDF of the Poisson-sum limit law on `grid`.
#[pyfunction]
#[pyo3(signature = (c, s, delta, regime, grid))]
fn stable_cdf(py: Python<'_>, c: f64, s: f64, delta: f64, regime: &str, grid: Vec<f64>) -> PyResult<Vec<f64>> {
    let law = StableLaw::new(c, s, delta, parse_regime(regime)?).map_err(py_err)?;
    let table = py.detach(|| limit_laws::stable_cdf(&law, &grid)).map_err(py_err)?;
    Ok(table.cdf)
}

#[pyfunction]
fn frechet_cdf(c: f64, s: f64, x: f64) -> f64 {
    limit_laws::frechet_cdf(c, s, x)
}

#[pyfunction]
fn fit_frechet_c(sample: Vec<f64>, s: f64) -> PyResult<f64> {
    limit_laws::fit_frechet_c(&sample, s).map_err(py_err)
}

/// Validate a JSON experiment config; returns `(s, regime)`.
#[pyfunction]
fn validate_config(text: &str) -> PyResult<(f64, String)> {
    let r = ExperimentConfig::from_json(text).and_then(|c| c.validate()).map_err(py_err)?;
    Ok((r.s, format!("{:?}", r.regime).to_lowercase()))
}

/// Run one acceptance criterion on the default config (or `config_json`);
/// returns `(status, [(label, value, op, limit, passed)])`.
#[pyfunction]
#[pyo3(signature = (id, config_json=None))]
#[allow(clippy::type_complexity)]
fn run_criterion(
    py: Python<'_>,
    id: u32,
    config_json: Option<&str>,
) -> PyResult<(String, Vec<(String, f64, String, f64, bool)>)> {
    let config = match config_json {
        Some(t) => ExperimentConfig::from_json(t).map_err(py_err)?,
        None => ExperimentConfig::default(),
    };
    let report = py.detach(|| Verifier::new(&config).map(|v| v.run(id))).map_err(py_err)?;
    if report.status == Status::Error {
        return Err(RwreError::new_err(report.summary()));
    }
    let status = if report.passed() { "pass" } else { "fail" };
    let checks = report.checks.into_iter().map(|c| (c.label, c.value, c.op.to_string(), c.limit, c.passed)).collect();
    Ok((status.to_string(), checks))
}

#[pymodule]
fn rwre_lab(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("RwreError", m.py().get_type::<RwreError>())?;
    m.add("__version__", rwre_core::VERSION)?;
    m.add_class::<PyModel>()?;
    m.add_class::<PyEnvironment>()?;
    m.add_class::<PyProfile>()?;
    m.add_function(wrap_pyfunction!(stable_cdf, m)?)?;
    m.add_function(wrap_pyfunction!(frechet_cdf, m)?)?;
    m.add_function(wrap_pyfunction!(fit_frechet_c, m)?)?;
    m.add_function(wrap_pyfunction!(validate_config, m)?)?;
    m.add_function(wrap_pyfunction!(run_criterion, m)?)?;
    Ok(())
}
