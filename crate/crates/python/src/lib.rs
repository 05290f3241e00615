//! Python bindings: benchmark problems, the GP surrogate, pointwise and
//! regional acquisitions, TuRBO runs and the Wilcoxon tests.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use turbo_rei::bench::method::MethodSpec;
use turbo_rei::gp::{fit_map, FitConfig, GpModel};
use turbo_rei::problem::{benchmark_suite, Dataset, ObjectiveFn};
use turbo_rei::regional::{self, RegionGeometry, RegionalAcqSpec, RegionalBase};
use turbo_rei::turbo::{turbo_m_run, TurboConfig};
use turbo_rei::acquisition::DEFAULT_UCB_BETA;
use turbo_rei::{acquisition, bench, Error};

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Config(_) | Error::Degenerate(_) => PyValueError::new_err(e.to_string()),
        other => PyRuntimeError::new_err(other.to_string()),
    }
}

/// A benchmark function on the unit cube.
#[pyclass(name = "Benchmark", module = "turbo_rei_py")]
struct PyBenchmark {
    inner: ObjectiveFn,
}

#[pymethods]
impl PyBenchmark {
    #[new]
    fn new(name: &str, dim: usize) -> PyResult<Self> {
        Ok(Self { inner: benchmark_suite(name, dim).map_err(to_py)? })
    }

    #[getter]
    fn name(&self) -> String {
        self.inner.name().to_string()
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    #[getter]
    fn known_optimum(&self) -> Option<f64> {
        self.inner.known_optimum()
    }

    /// Raw-space bounds as `(lower, upper)`.
    #[getter]
    fn bounds(&self) -> (Vec<f64>, Vec<f64>) {
        let s = self.inner.space();
        (s.lower().to_vec(), s.upper().to_vec())
    }

    /// Evaluates at a point in unit-cube coordinates.
    fn __call__(&self, x: Vec<f64>) -> PyResult<f64> {
        if x.len() != self.inner.dim() {
            return Err(PyValueError::new_err(format!("expected {} coordinates, got {}", self.inner.dim(), x.len())));
        }
        Ok(self.inner.evaluate(&x))
    }

    fn __repr__(&self) -> String {
        format!("Benchmark('{}', dim={})", self.inner.name(), self.inner.dim())
    }
}

/// MAP-fitted Matérn-5/2 GP. Predictions are in the original output units.
#[pyclass(name = "GaussianProcess", module = "turbo_rei_py")]
struct PyGp {
    model: GpModel,
}

#[pymethods]
impl PyGp {
    #[new]
    #[pyo3(signature = (x, y, seed = 0, restarts = 8))]
    fn new(x: Vec<Vec<f64>>, y: Vec<f64>, seed: u64, restarts: usize) -> PyResult<Self> {
        let data = Dataset::from_parts(x, y).map_err(to_py)?;
        let cfg = FitConfig { seed, n_restarts: restarts, ..FitConfig::default() };
        Ok(Self { model: fit_map(&data, &cfg).map_err(to_py)? })
    }

    #[getter]
    fn lengthscales(&self) -> Vec<f64> {
        self.model.hyperparams().lengthscales.clone()
    }

    #[getter]
    fn signal_variance(&self) -> f64 {
        self.model.hyperparams().signal_variance
    }

    #[getter]
    fn noise_variance(&self) -> f64 {
        self.model.hyperparams().noise_variance
    }

    /// Posterior means and variances at `x`.
    fn predict(&self, x: Vec<Vec<f64>>) -> PyResult<(Vec<f64>, Vec<f64>)> {
        if x.iter().any(|p| p.len() != self.model.dim()) {
            return Err(PyValueError::new_err("point dimension does not match the model"));
        }
        let s = self.model.standardization();
        let (m, v) = self.model.posterior(&x);
        Ok((m.iter().map(|&m| s.invert(m)).collect(), v.iter().map(|&v| v * s.std * s.std).collect()))
    }

    /// Expected improvement over the best training value at each point of `x`.
    fn expected_improvement(&self, x: Vec<Vec<f64>>) -> Vec<f64> {
        let (m, v) = self.model.posterior(&x);
        let s = self.model.standardization();
        let f_ref = self.model.f_ref();
        m.iter().zip(&v).map(|(&m, &v)| acquisition::ei(m, v, f_ref) * s.std).collect()
    }

    /// Region-averaged acquisition of the box `center ± lengths/2`.
    ///
    /// `kind` is one of `qrei`, `rei`, `log_rei` or `rucb`; values other than
    /// `log_rei` and `rucb` are in original output units.
    #[pyo3(signature = (center, lengths, kind = "qrei", n_x = 128, n_f = 256, seed = 0, beta = DEFAULT_UCB_BETA))]
    #[allow(clippy::too_many_arguments)]
    fn regional(
        &self,
        center: Vec<f64>,
        lengths: Vec<f64>,
        kind: &str,
        n_x: usize,
        n_f: usize,
        seed: u64,
        beta: f64,
    ) -> PyResult<f64> {
        let geom = RegionGeometry::new(center, lengths);
        let f_ref = self.model.f_ref();
        let std = self.model.standardization().std;
        let v = match kind {
            "rei" => regional::rei(&self.model, &geom, f_ref, n_x, seed).map(|v| v * std),
            "log_rei" => regional::log_rei(&self.model, &geom, f_ref, n_x, seed),
            "rucb" => regional::rucb(&self.model, &geom, beta, n_x, seed),
            "qrei" => {
                let spec =
                    RegionalAcqSpec { base: RegionalBase::QImprovement, n_x, n_f, q: 1, base_sample_seed: seed };
                regional::qrei(&self.model, &[geom], f_ref, &spec).map(|v| v * std)
            }
            other => return Err(PyValueError::new_err(format!("unknown regional acquisition '{other}'"))),
        };
        v.map_err(to_py)
    }
}

/// Analytic expected improvement for minimization.
#[pyfunction]
fn ei(mean: f64, variance: f64, f_ref: f64) -> f64 {
    acquisition::ei(mean, variance, f_ref)
}

/// Logarithm of expected improvement, accurate far into the tail.
#[pyfunction]
fn log_ei(mean: f64, variance: f64, f_ref: f64) -> f64 {
    acquisition::log_ei(mean, variance, f_ref)
}

/// Runs one optimization and returns its records as a list of dicts.
#[pyfunction]
#[pyo3(signature = (problem, dim, method = "turbo1-logei", budget = 200, n_init = 30, seed = 0, m = 1))]
fn run(
    py: Python<'_>,
    problem: &str,
    dim: usize,
    method: &str,
    budget: usize,
    n_init: usize,
    seed: u64,
    m: usize,
) -> PyResult<Vec<Py<PyDict>>> {
    let objective = benchmark_suite(problem, dim).map_err(to_py)?;
    let spec = MethodSpec::parse(method, m, DEFAULT_UCB_BETA).map_err(to_py)?;
    let cfg = spec.apply(&TurboConfig { budget, n_init, ..TurboConfig::default() });
    let out = py.detach(|| turbo_m_run(&objective, &cfg, spec.m, seed));
    let records = out.into_result().map_err(to_py)?;
    records
        .iter()
        .map(|r| {
            let d = PyDict::new(py);
            d.set_item("seed", r.seed)?;
            d.set_item("eval_index", r.eval_index)?;
            d.set_item("event", r.event.as_str())?;
            d.set_item("region_id", r.region_id)?;
            d.set_item("f", r.value)?;
            d.set_item("best_f", r.best_so_far)?;
            d.set_item("x", r.point.clone())?;
            Ok(d.unbind())
        })
        .collect()
}

/// Two-sided paired Wilcoxon signed-rank test; returns `(statistic, p_value)`.
#[pyfunction]
fn wilcoxon_signed_rank(a: Vec<f64>, b: Vec<f64>) -> PyResult<(f64, f64)> {
    let t = bench::wilcoxon_signed_rank(&a, &b).map_err(to_py)?;
    Ok((t.statistic, t.p_value))
}

/// Two-sided Wilcoxon rank-sum test; returns `(statistic, p_value)`.
#[pyfunction]
fn wilcoxon_rank_sum(a: Vec<f64>, b: Vec<f64>) -> PyResult<(f64, f64)> {
    let t = bench::wilcoxon_rank_sum(&a, &b).map_err(to_py)?;
    Ok((t.statistic, t.p_value))
}

#[pymodule]
fn turbo_rei_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyBenchmark>()?;
    m.add_class::<PyGp>()?;
    m.add_function(wrap_pyfunction!(ei, m)?)?;
    m.add_function(wrap_pyfunction!(log_ei, m)?)?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    m.add_function(wrap_pyfunction!(wilcoxon_signed_rank, m)?)?;
    m.add_function(wrap_pyfunction!(wilcoxon_rank_sum, m)?)?;
    Ok(())
}
