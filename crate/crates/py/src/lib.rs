//! Python bindings: datasets, sub-sampling schemes, sampler runs and diagnostics.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use zigzag_core::data::{generate_seeded, load_csv, CsvOptions, Density, ResponseMode, SynthSpec};
use zigzag_core::diagnostics::{self, integrate_moments, mixing_report};
use zigzag_core::experiment::{build_scheme, run_experiment as run_suite, ExperimentConfig};
use zigzag_core::mode::{posterior_mode as mode_of, ModeOptions};
use zigzag_core::{
    likelihood_grad_full, Error, Precondition, PriorSpec, RecordMode, RunConfig, SchemeSpec, SubsamplingScheme,
    ZigZagState,
};

fn py_err(e: Error) -> PyErr {
    if e.is_invariant_violation() {
        PyRuntimeError::new_err(e.to_string())
    } else {
        PyValueError::new_err(e.to_string())
    }
}

fn parse<T: std::str::FromStr<Err = Error>>(s: &str) -> PyResult<T> {
    s.parse().map_err(py_err)
}

/// Sparse logistic-regression dataset.
#[pyclass(name = "Dataset", module = "zigzag", frozen)]
struct PyDataset {
    inner: zigzag_core::Dataset,
}

#[pymethods]
impl PyDataset {
    /// Builds a dataset from dense rows and 0/1 responses.
    #[staticmethod]
    fn from_dense(rows: Vec<Vec<f64>>, y: Vec<u8>) -> PyResult<Self> {
        let inner = zigzag_core::Dataset::from_dense(&rows, y).map_err(py_err)?;
        Ok(PyDataset { inner })
    }

    /// Loads a headered CSV. Returns `(dataset, report_json)`.
    #[staticmethod]
    #[pyo3(signature = (path, response, intercept = false))]
    fn from_csv(path: &str, response: &str, intercept: bool) -> PyResult<(Self, String)> {
        let opts = CsvOptions {
            intercept,
            ..CsvOptions::default()
        };
        let (inner, report) = load_csv(path, response, &opts).map_err(py_err)?;
        let json = serde_json::to_string(&report).map_err(|e| PyValueError::new_err(e.to_string()))?;
        Ok((PyDataset { inner }, json))
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n()
    }

    #[getter]
    fn p(&self) -> usize {
        self.inner.p()
    }

    #[getter]
    fn nnz(&self) -> usize {
        self.inner.nnz()
    }

    #[getter]
    fn positives(&self) -> usize {
        self.inner.positives()
    }

    fn responses(&self) -> Vec<u8> {
        self.inner.responses().to_vec()
    }

    /// Negative log posterior (up to a constant) under `prior`.
    fn potential(&self, prior: &str, xi: Vec<f64>) -> PyResult<f64> {
        let prior: PriorSpec = parse(prior)?;
        if xi.len() != self.inner.p() {
            return Err(PyValueError::new_err("position length must equal p"));
        }
        Ok(self.inner.potential(&prior, &xi))
    }

    /// Likelihood gradient in every coordinate.
    fn gradient(&self, xi: Vec<f64>) -> PyResult<Vec<f64>> {
        (0..self.inner.p())
            .map(|i| likelihood_grad_full(&self.inner, i, &xi).map_err(py_err))
            .collect()
    }

    fn __repr__(&self) -> String {
        format!(
            "Dataset(n={}, p={}, nnz={}, positives={})",
            self.inner.n(),
            self.inner.p(),
            self.inner.nnz(),
            self.inner.positives()
        )
    }
}

/// Synthetic data: covariates are nonzero with probability `sparsity`, drawn
/// from `density` ("normal" or "laplace"); `ones` fixes the number of positive
/// responses, otherwise they follow the model with a random unit coefficient.
#[pyfunction]
#[pyo3(signature = (n, p, sparsity = 1.0, density = "normal", ones = None, intercept = false, seed = 0))]
fn generate(
    n: usize,
    p: usize,
    sparsity: f64,
    density: &str,
    ones: Option<usize>,
    intercept: bool,
    seed: u64,
) -> PyResult<PyDataset> {
    let density = match density {
        "normal" => Density::Normal,
        "laplace" => Density::Laplace,
        other => return Err(PyValueError::new_err(format!("unknown density '{other}'"))),
    };
    let mut spec = SynthSpec::new(n, p, sparsity, density).with_intercept(intercept);
    if let Some(k) = ones {
        spec = spec.with_responses(ResponseMode::FixedOnes { k });
    }
    let inner = generate_seeded(&spec, seed).map_err(py_err)?;
    Ok(PyDataset { inner })
}

#[pyfunction]
#[pyo3(signature = (data, prior = "gaussian:1"))]
fn posterior_mode(data: &PyDataset, prior: &str) -> PyResult<Vec<f64>> {
    let prior: PriorSpec = parse(prior)?;
    mode_of(&data.inner, &prior, ModeOptions::default()).map_err(py_err)
}

/// Gradient estimator with its rate envelopes, bound to one dataset.
#[pyclass(name = "Scheme", module = "zigzag", frozen)]
struct PyScheme {
    inner: SubsamplingScheme,
}

#[pymethods]
impl PyScheme {
    /// `spec` like `"importance,cv,m=5"`. Schemes with control variates or
    /// strata use `reference`, or the posterior mode under `prior` if omitted.
    #[new]
    #[pyo3(signature = (data, spec, reference = None, prior = "gaussian:1"))]
    fn new(data: &PyDataset, spec: &str, reference: Option<Vec<f64>>, prior: &str) -> PyResult<Self> {
        let spec: SchemeSpec = parse(spec)?;
        let prior: PriorSpec = parse(prior)?;
        let inner = build_scheme(&data.inner, &prior, spec, reference.as_deref()).map_err(py_err)?;
        Ok(PyScheme { inner })
    }

    #[getter]
    fn spec(&self) -> String {
        self.inner.spec().to_string()
    }

    #[getter]
    fn minibatch(&self) -> usize {
        self.inner.minibatch()
    }

    /// Strata of dimension `i` as lists of observation indices, if stratified.
    fn strata(&self, i: usize) -> Option<Vec<Vec<usize>>> {
        self.inner.strata(i)
    }

    fn __repr__(&self) -> String {
        format!("Scheme('{}')", self.inner.spec())
    }
}

/// Recorded trajectory.
#[pyclass(name = "Skeleton", module = "zigzag", frozen)]
struct PySkeleton {
    inner: zigzag_core::Skeleton,
}

#[pymethods]
impl PySkeleton {
    #[getter]
    fn p(&self) -> usize {
        self.inner.p()
    }

    #[getter]
    fn start_time(&self) -> f64 {
        self.inner.start_time()
    }

    #[getter]
    fn end_time(&self) -> f64 {
        self.inner.end_time()
    }

    #[getter]
    fn flips(&self) -> usize {
        self.inner.flip_count()
    }

    #[getter]
    fn final_position(&self) -> Vec<f64> {
        self.inner.final_state.xi.clone()
    }

    #[getter]
    fn speeds(&self) -> Vec<f64> {
        self.inner.final_state.alpha.clone()
    }

    #[getter]
    fn frozen_at(&self) -> Option<f64> {
        self.inner.stats.frozen_at
    }

    /// `(time, dimension)` of each accepted flip.
    fn flip_events(&self) -> Vec<(f64, usize)> {
        self.inner.events.iter().filter(|e| e.accepted).map(|e| (e.t, e.dim)).collect()
    }

    /// Position at time `t`.
    fn position_at(&self, t: f64) -> PyResult<Vec<f64>> {
        Ok(self.inner.state_at(t).map_err(py_err)?.xi)
    }

    /// Trajectory mean and variance per dimension.
    fn moments(&self) -> (Vec<f64>, Vec<f64>) {
        let m = integrate_moments(&self.inner);
        (m.mean(), m.variance())
    }

    /// Part of the trajectory after time `t`.
    fn tail(&self, t: f64) -> PyResult<PySkeleton> {
        Ok(PySkeleton {
            inner: self.inner.tail_from(t).map_err(py_err)?,
        })
    }

    /// Mixing summary as a dict; undefined entries are `None`.
    #[pyo3(signature = (samples = diagnostics::DEFAULT_SAMPLES))]
    fn mixing<'py>(&self, py: Python<'py>, samples: usize) -> PyResult<Bound<'py, PyDict>> {
        let r = mixing_report(&self.inner, samples).map_err(py_err)?;
        let d = PyDict::new(py);
        d.set_item("iact", r.iact)?;
        d.set_item("mixing_time", r.mixing_time)?;
        d.set_item("ess", r.ess)?;
        d.set_item("delta_t", r.delta_t)?;
        d.set_item("samples", r.samples)?;
        Ok(d)
    }

    fn to_json(&self) -> PyResult<String> {
        serde_json::to_string(&self.inner).map_err(|e| PyValueError::new_err(e.to_string()))
    }

    fn __repr__(&self) -> String {
        format!(
            "Skeleton(p={}, flips={}, end_time={})",
            self.inner.p(),
            self.inner.flip_count(),
            self.inner.end_time()
        )
    }
}

/// Runs the sampler from `init` (default: posterior mode).
#[pyfunction]
#[pyo3(signature = (data, scheme, prior = "gaussian:1", attempts = 100_000, seed = 0,
                    precondition = "off", record_mode = "flips_only", init = None))]
#[allow(clippy::too_many_arguments)]
fn sample(
    py: Python<'_>,
    data: &PyDataset,
    scheme: &PyScheme,
    prior: &str,
    attempts: u64,
    seed: u64,
    precondition: &str,
    record_mode: &str,
    init: Option<Vec<f64>>,
) -> PyResult<PySkeleton> {
    let prior: PriorSpec = parse(prior)?;
    let pre: Precondition = parse(precondition)?;
    let rec: RecordMode = parse(record_mode)?;
    let start = match init {
        Some(x) => x,
        None => mode_of(&data.inner, &prior, ModeOptions::default()).map_err(py_err)?,
    };
    let cfg = RunConfig::new(attempts, seed).with_precondition(pre).with_record_mode(rec);
    let inner = py
        .detach(|| zigzag_core::run(&data.inner, &prior, &scheme.inner, &cfg, ZigZagState::at(start)))
        .map_err(py_err)?;
    Ok(PySkeleton { inner })
}

/// Integrated autocorrelation time of a series (at least 100 values).
#[pyfunction]
fn iact(samples: Vec<f64>) -> PyResult<f64> {
    diagnostics::iact(&samples).map_err(py_err)
}

/// Runs an experiment suite from its JSON config. Returns `{table_name: csv}`;
/// also writes the tables and manifest when `out_dir` is given.
#[pyfunction]
#[pyo3(signature = (config_json, out_dir = None, jobs = None))]
fn run_experiment<'py>(
    py: Python<'py>,
    config_json: &str,
    out_dir: Option<&str>,
    jobs: Option<usize>,
) -> PyResult<Bound<'py, PyDict>> {
    let cfg = ExperimentConfig::from_json(config_json).map_err(py_err)?;
    let out = py.detach(|| run_suite(&cfg, jobs)).map_err(py_err)?;
    if let Some(dir) = out_dir {
        out.write(std::path::Path::new(dir)).map_err(py_err)?;
    }
    let d = PyDict::new(py);
    for t in &out.tables {
        d.set_item(&t.name, t.to_csv())?;
    }
    Ok(d)
}

#[pymodule]
fn zigzag(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyDataset>()?;
    m.add_class::<PyScheme>()?;
    m.add_class::<PySkeleton>()?;
    m.add_function(wrap_pyfunction!(generate, m)?)?;
    m.add_function(wrap_pyfunction!(posterior_mode, m)?)?;
    m.add_function(wrap_pyfunction!(sample, m)?)?;
    m.add_function(wrap_pyfunction!(iact, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
