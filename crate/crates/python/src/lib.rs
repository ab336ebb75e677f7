//! Python bindings. The module is importable as `condrisk`.

use pyo3::exceptions::{PyArithmeticError, PyIOError, PyValueError};
use pyo3::prelude::*;

use condrisk::bias::{fit_components, BandwidthChoice, FitConfig, FittedComponents};
use condrisk::bootstrap::{risk_maps, BootstrapConfig, BootstrapEngine, BootstrapMode};
use condrisk::cli::ingest_csv;
use condrisk::sim::{ik_baseline, run_study, scenario_by_name, scenario_field, scenario_registry};
use condrisk::smoothing::BandwidthMatrix;
use condrisk::spatial::{Location, SpatialSample};
use condrisk::{Error, ErrorCategory};

fn to_py(e: Error) -> PyErr {
    let msg = format!("{}: {e}", e.tag());
    match (&e, e.category()) {
        (Error::Io(_), _) => PyIOError::new_err(msg),
        (_, ErrorCategory::Numerical) => PyArithmeticError::new_err(msg),
        _ => PyValueError::new_err(msg),
    }
}

fn locations(x1: &[f64], x2: &[f64]) -> PyResult<Vec<Location>> {
    if x1.len() != x2.len() {
        return Err(PyValueError::new_err("x1 and x2 differ in length"));
    }
    Ok(x1.iter().zip(x2).map(|(&a, &b)| Location::new(a, b)).collect())
}

fn sample(x1: &[f64], x2: &[f64], y: &[f64]) -> PyResult<SpatialSample> {
    SpatialSample::new(locations(x1, x2)?, y.to_vec()).map_err(to_py)
}

fn columns(locs: &[Location]) -> (Vec<f64>, Vec<f64>) {
    locs.iter().map(|l| (l.x1, l.x2)).unzip()
}

fn bandwidth_arg(h: Option<[f64; 3]>) -> PyResult<BandwidthChoice> {
    match h {
        None => Ok(BandwidthChoice::Auto),
        Some([a, b, c]) => BandwidthMatrix::new(a, b, c).map(BandwidthChoice::Fixed).map_err(to_py),
    }
}

/// Exceedance probabilities `P(Y > c)` at a set of locations.
#[pyclass(name = "RiskMap", module = "condrisk", frozen)]
struct PyRiskMap {
    #[pyo3(get)]
    x1: Vec<f64>,
    #[pyo3(get)]
    x2: Vec<f64>,
    #[pyo3(get)]
    threshold: f64,
    #[pyo3(get)]
    prob: Vec<f64>,
}

#[pymethods]
impl PyRiskMap {
    fn __len__(&self) -> usize {
        self.prob.len()
    }

    fn __repr__(&self) -> String {
        format!("RiskMap(c={}, n={})", self.threshold, self.prob.len())
    }
}

/// Fitted trend, variance and variogram of a sample.
#[pyclass(name = "Fit", module = "condrisk", frozen)]
struct PyFit {
    inner: FittedComponents,
}

#[pymethods]
impl PyFit {
    #[getter]
    fn trend(&self) -> Vec<f64> {
        self.inner.trend.clone()
    }

    #[getter]
    fn variance(&self) -> Vec<f64> {
        self.inner.variance.clone()
    }

    #[getter]
    fn residuals(&self) -> Vec<f64> {
        self.inner.residuals.clone()
    }

    #[getter]
    fn trend_targets(&self) -> Vec<f64> {
        self.inner.trend_targets.clone()
    }

    #[getter]
    fn variance_targets(&self) -> Vec<f64> {
        self.inner.variance_targets.clone()
    }

    /// `(h11, h12, h22)` of the trend smoother.
    #[getter]
    fn trend_bandwidth(&self) -> [f64; 3] {
        self.inner.trend_bandwidth.entries()
    }

    #[getter]
    fn variance_bandwidth(&self) -> [f64; 3] {
        self.inner.variance_bandwidth.entries()
    }

    #[getter]
    fn lag_bandwidth(&self) -> f64 {
        self.inner.lag_bandwidth
    }

    /// `(nugget, nodes, weights)` of the unit-sill variogram.
    #[getter]
    fn variogram(&self) -> (f64, Vec<f64>, Vec<f64>) {
        let v = &self.inner.variogram;
        (v.nugget, v.nodes.clone(), v.weights.clone())
    }

    #[getter]
    fn iterations(&self) -> usize {
        self.inner.iterations
    }

    #[getter]
    fn converged(&self) -> bool {
        self.inner.converged
    }

    /// Bootstrap risk maps at the fit's targets, one per threshold.
    #[pyo3(signature = (thresholds, mode = "conditional", b = 1000, seed = 1))]
    fn risk_map(
        &self,
        py: Python<'_>,
        thresholds: Vec<f64>,
        mode: &str,
        b: usize,
        seed: u64,
    ) -> PyResult<Vec<PyRiskMap>> {
        let mode = BootstrapMode::parse(mode).map_err(to_py)?;
        let maps = py
            .detach(|| {
                let engine = BootstrapEngine::new(&self.inner, mode)?;
                let ens = engine.run(&BootstrapConfig::new(b, seed)?);
                Ok(risk_maps(&ens, &thresholds))
            })
            .map_err(to_py)?;
        Ok(maps
            .into_iter()
            .map(|m| {
                let (x1, x2) = columns(&m.locations);
                PyRiskMap { x1, x2, threshold: m.threshold, prob: m.probabilities }
            })
            .collect())
    }

    fn __repr__(&self) -> String {
        format!(
            "Fit(n={}, targets={}, iterations={})",
            self.inner.n(),
            self.inner.targets.len(),
            self.inner.iterations
        )
    }
}

/// Reads an `x1,x2,y` CSV into three columns.
#[pyfunction]
#[pyo3(signature = (path, allow_small = false))]
fn read_csv(path: &str, allow_small: bool) -> PyResult<(Vec<f64>, Vec<f64>, Vec<f64>)> {
    let s = ingest_csv(path.as_ref(), allow_small).map_err(to_py)?;
    let (x1, x2) = columns(s.locations());
    Ok((x1, x2, s.values().to_vec()))
}

/// Fits trend, variance and variogram. Bandwidths are `(h11, h12, h22)`
/// or chosen automatically when omitted.
#[pyfunction]
#[pyo3(signature = (x1, x2, y, tx1 = None, tx2 = None, bandwidth = None, variance_bandwidth = None))]
#[allow(clippy::too_many_arguments)]
fn fit(
    py: Python<'_>,
    x1: Vec<f64>,
    x2: Vec<f64>,
    y: Vec<f64>,
    tx1: Option<Vec<f64>>,
    tx2: Option<Vec<f64>>,
    bandwidth: Option<[f64; 3]>,
    variance_bandwidth: Option<[f64; 3]>,
) -> PyResult<PyFit> {
    let s = sample(&x1, &x2, &y)?;
    let targets = locations(&tx1.unwrap_or_default(), &tx2.unwrap_or_default())?;
    let cfg = FitConfig {
        trend: bandwidth_arg(bandwidth)?,
        variance: bandwidth_arg(variance_bandwidth)?,
        ..FitConfig::default()
    };
    let inner = py.detach(|| fit_components(&s, &targets, &cfg)).map_err(to_py)?;
    Ok(PyFit { inner })
}

/// Indicator kriging of `1{Y > c}`; returns `(clamped, raw)` probabilities.
#[pyfunction]
fn indicator_kriging(
    x1: Vec<f64>,
    x2: Vec<f64>,
    y: Vec<f64>,
    tx1: Vec<f64>,
    tx2: Vec<f64>,
    c: f64,
) -> PyResult<(Vec<f64>, Vec<f64>)> {
    let s = sample(&x1, &x2, &y)?;
    let r = ik_baseline(&s, &locations(&tx1, &tx2)?, c).map_err(to_py)?;
    Ok((r.clamped, r.raw))
}

/// Names of the built-in simulation scenarios.
#[pyfunction]
fn scenarios() -> Vec<String> {
    scenario_registry().into_iter().map(|s| s.name).collect()
}

/// One simulated field of a scenario as `(x1, x2, y)`.
#[pyfunction]
#[pyo3(signature = (scenario, field = 0, seed = None))]
fn simulate(scenario: &str, field: usize, seed: Option<u64>) -> PyResult<(Vec<f64>, Vec<f64>, Vec<f64>)> {
    let mut spec = scenario_by_name(scenario).map_err(to_py)?;
    if let Some(seed) = seed {
        spec.seed = seed;
    }
    let s = scenario_field(&spec, field).map_err(to_py)?;
    let (x1, x2) = columns(s.locations());
    Ok((x1, x2, s.values().to_vec()))
}

/// Monte Carlo study of a scenario. Returns rows of
/// `(scenario, c, mean, median, sd, n_failed)` with errors in units of 1e-2.
#[pyfunction]
#[pyo3(signature = (scenario, n_sim = None, b = None, seed = None, ik = false))]
fn study(
    py: Python<'_>,
    scenario: &str,
    n_sim: Option<usize>,
    b: Option<usize>,
    seed: Option<u64>,
    ik: bool,
) -> PyResult<Vec<(String, f64, f64, f64, f64, usize)>> {
    let mut spec = scenario_by_name(scenario).map_err(to_py)?;
    spec.n_sim = n_sim.unwrap_or(spec.n_sim);
    spec.b = b.unwrap_or(spec.b);
    spec.seed = seed.unwrap_or(spec.seed);
    spec.ik |= ik;
    let rows = py.detach(|| run_study(&spec)).map_err(to_py)?;
    Ok(rows.into_iter().map(|r| (r.scenario, r.c, r.mean, r.median, r.sd, r.n_failed)).collect())
}

#[pymodule]
#[pyo3(name = "condrisk")]
fn condrisk_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyFit>()?;
    m.add_class::<PyRiskMap>()?;
    m.add_function(wrap_pyfunction!(read_csv, m)?)?;
    m.add_function(wrap_pyfunction!(fit, m)?)?;
    m.add_function(wrap_pyfunction!(indicator_kriging, m)?)?;
    m.add_function(wrap_pyfunction!(scenarios, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(study, m)?)?;
    Ok(())
}
