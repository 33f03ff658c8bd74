//! Python bindings for the `cmamae` core library.

use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;
use rand_chacha::ChaCha8Rng;

use cmamae::experiment::{run_experiment, ExperimentConfig};
use cmamae::{
    insert as insert_solution, Domain as _, DomainKind, EsKind, EsParams, EsState, GridSpec, RankedBatch,
    ResultArchive as CoreResult, SoftArchive as CoreSoft, SolutionRecord,
};

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn parse_kind(name: &str) -> PyResult<EsKind> {
    name.parse().map_err(value_err)
}

/// Ask/tell evolution strategy with a seeded private generator.
#[pyclass(name = "EvolutionStrategy", module = "cmamae_py")]
struct PyEs {
    inner: EsState,
    rng: ChaCha8Rng,
}

#[pymethods]
impl PyEs {
    #[new]
    #[pyo3(signature = (kind, mean, sigma0=0.02, batch_size=40, seed=0, directions=40, learning_rate=0.01, l2_coeff=0.005))]
    #[allow(clippy::too_many_arguments)]
    fn new(
        kind: &str,
        mean: Vec<f64>,
        sigma0: f64,
        batch_size: usize,
        seed: u64,
        directions: usize,
        learning_rate: f64,
        l2_coeff: f64,
    ) -> PyResult<Self> {
        let params = EsParams::new(parse_kind(kind)?)
            .batch_size(batch_size)
            .sigma0(sigma0)
            .directions(directions)
            .learning_rate(learning_rate)
            .l2_coeff(l2_coeff);
        Ok(PyEs {
            inner: EsState::new(&params, &mean).map_err(value_err)?,
            rng: cmamae::rng::emitter_stream(seed, 0),
        })
    }

    fn ask(&mut self) -> PyResult<Vec<Vec<f64>>> {
        self.inner.ask(&mut self.rng).map_err(value_err)
    }

    /// Updates from solutions with their improvement values; higher is
    /// better. `objectives` breaks ties and defaults to `improvements`.
    #[pyo3(signature = (solutions, improvements, objectives=None))]
    fn tell(&mut self, solutions: Vec<Vec<f64>>, improvements: Vec<f64>, objectives: Option<Vec<f64>>) -> PyResult<bool> {
        let objectives = objectives.unwrap_or_else(|| improvements.clone());
        let batch = RankedBatch::new(solutions, &improvements, &objectives).map_err(value_err)?;
        self.inner.tell(&batch).map_err(value_err)?;
        Ok(self.inner.needs_restart(&batch))
    }

    fn reset(&mut self, mean: Vec<f64>, sigma0: f64) -> PyResult<()> {
        self.inner.reset(&mean, sigma0).map_err(value_err)
    }

    #[getter]
    fn mean(&self) -> Vec<f64> {
        self.inner.mean().to_vec()
    }

    #[getter]
    fn step_size(&self) -> f64 {
        self.inner.step_size()
    }

    #[getter]
    fn generation(&self) -> usize {
        self.inner.generation()
    }

    #[getter]
    fn kind(&self) -> &'static str {
        self.inner.kind().variant_name()
    }

    fn stored_reals(&self) -> usize {
        self.inner.stored_reals()
    }

    /// Covariance of the sampling distribution as a list of rows.
    fn covariance(&self) -> Vec<Vec<f64>> {
        let c = self.inner.represented_covariance();
        c.row_iter().map(|r| r.iter().copied().collect()).collect()
    }
}

/// Paired soft and result archives over a regular grid.
#[pyclass(name = "Archive", module = "cmamae_py")]
struct PyArchive {
    soft: CoreSoft,
    result: CoreResult,
}

#[pymethods]
impl PyArchive {
    #[new]
    #[pyo3(signature = (dims, lower, upper, alpha=0.001, min_f=0.0))]
    fn new(dims: Vec<usize>, lower: Vec<f64>, upper: Vec<f64>, alpha: f64, min_f: f64) -> PyResult<Self> {
        let spec = GridSpec::new(dims, lower, upper).map_err(value_err)?;
        Ok(PyArchive {
            soft: CoreSoft::new(spec.clone(), alpha, min_f).map_err(value_err)?,
            result: CoreResult::new(spec, min_f).map_err(value_err)?,
        })
    }

    /// Returns `(improvement, accepted, cell)`.
    fn insert(&mut self, params: Vec<f64>, objective: f64, measures: Vec<f64>) -> PyResult<(f64, bool, usize)> {
        let record = SolutionRecord::new(params, objective, measures);
        let r = insert_solution(&mut self.soft, &mut self.result, record).map_err(value_err)?;
        Ok((r.improvement, r.accepted, r.cell))
    }

    fn threshold(&self, cell: usize) -> PyResult<f64> {
        if cell >= self.soft.spec().cells() {
            return Err(value_err(format!("cell {cell} out of range")));
        }
        Ok(self.soft.threshold(cell))
    }

    fn cell_index(&self, measures: Vec<f64>) -> PyResult<usize> {
        self.soft.spec().cell_index(&measures).map_err(value_err)
    }

    /// `(cell, objective)` of the best solution kept per cell.
    fn elites(&self) -> Vec<(usize, f64)> {
        self.result.snapshot().into_iter().map(|(c, s)| (c, s.objective)).collect()
    }

    fn stats<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        report_dict(py, &cmamae::summarize(&self.result, self.result.min_f(), 0))
    }

    fn __len__(&self) -> usize {
        self.result.occupied_count()
    }
}

fn report_dict<'py>(py: Python<'py>, m: &cmamae::MetricsReport) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("qd_score", m.qd_score)?;
    d.set_item("coverage", m.coverage)?;
    d.set_item("best", m.best)?;
    d.set_item("elapsed_ms", m.elapsed_ms)?;
    Ok(d)
}

/// Objective and measures of `x` on a named domain such as `sphere-100`.
#[pyfunction]
fn evaluate(domain: &str, x: Vec<f64>) -> PyResult<(f64, Vec<f64>)> {
    let d: DomainKind = domain.parse().map_err(value_err)?;
    if x.len() != d.dim() {
        return Err(value_err(format!("{domain} expects {} parameters", d.dim())));
    }
    Ok(d.evaluate(&x))
}

/// Runs one seeded experiment in memory and returns its final metrics.
/// Keyword arguments use the configuration-file keys.
#[pyfunction]
#[pyo3(signature = (seed=0, **options))]
fn run<'py>(py: Python<'py>, seed: u64, options: Option<&Bound<'py, PyDict>>) -> PyResult<Bound<'py, PyDict>> {
    let config = config_from(options)?;
    let out = py
        .detach(|| cmamae::experiment::run_single(&config, seed))
        .map_err(value_err)?;
    let d = report_dict(py, &cmamae::summarize(&out.result, config.min_f, out.elapsed_ms))?;
    d.set_item("evaluations", out.log.last().map_or(0, |s| s.evaluations))?;
    Ok(d)
}

/// Runs every seed of a configuration, writing CSV outputs under
/// `output_dir`, and returns the mean metrics.
#[pyfunction]
#[pyo3(signature = (**options))]
fn run_to_dir<'py>(py: Python<'py>, options: Option<&Bound<'py, PyDict>>) -> PyResult<Bound<'py, PyDict>> {
    let config = config_from(options)?;
    let summary = py
        .detach(|| run_experiment(&config, &mut std::io::sink()))
        .map_err(|e| match e {
            cmamae::experiment::ExperimentError::Io { .. } => PyIOError::new_err(e.to_string()),
            other => value_err(other),
        })?;
    report_dict(py, &summary.mean)
}

fn config_from(options: Option<&Bound<'_, PyDict>>) -> PyResult<ExperimentConfig> {
    let mut config = ExperimentConfig::default();
    if let Some(opts) = options {
        for (k, v) in opts.iter() {
            let key: String = k.extract()?;
            let value = match v.extract::<Vec<u64>>() {
                Ok(list) => list.iter().map(u64::to_string).collect::<Vec<_>>().join(","),
                Err(_) => v.str()?.to_string(),
            };
            config.set(&key, &value).map_err(value_err)?;
        }
    }
    config.validate().map_err(value_err)?;
    Ok(config)
}

#[pymodule]
fn cmamae_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyEs>()?;
    m.add_class::<PyArchive>()?;
    m.add_function(wrap_pyfunction!(evaluate, m)?)?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    m.add_function(wrap_pyfunction!(run_to_dir, m)?)?;
    Ok(())
}
