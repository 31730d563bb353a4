//! Python bindings: tensors and masks as flat first-index-fastest buffers,
//! completion, metrics and file I/O.

use pyo3::exceptions::{PyIOError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use tuckercomp::io::{self, SyntheticSpec};
use tuckercomp::{Bandwidth, Error, SolverConfig, SolverKind};

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Io(_) | Error::BadMagic { .. } | Error::Truncated(_) | Error::Format(_) => PyIOError::new_err(e.to_string()),
        Error::Divergence { .. } | Error::SvdNoConvergence { .. } | Error::ZeroFactor { .. } => PyRuntimeError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

/// Dense real tensor; `data` is stored first index fastest.
#[pyclass(name = "Tensor", module = "tuckercomp_py", skip_from_py_object)]
#[derive(Clone)]
struct PyTensor(tuckercomp::DenseTensor);

#[pymethods]
impl PyTensor {
    #[new]
    fn new(dims: Vec<usize>, data: Vec<f64>) -> PyResult<Self> {
        tuckercomp::DenseTensor::new(dims, data).map(Self).map_err(to_py)
    }

    #[staticmethod]
    fn zeros(dims: Vec<usize>) -> PyResult<Self> {
        tuckercomp::DenseTensor::zeros(&dims).map(Self).map_err(to_py)
    }

    #[getter]
    fn dims(&self) -> Vec<usize> {
        self.0.dims().to_vec()
    }

    #[getter]
    fn data(&self) -> Vec<f64> {
        self.0.data().to_vec()
    }

    fn get(&self, index: Vec<usize>) -> PyResult<f64> {
        if index.len() != self.0.order() || index.iter().zip(self.0.dims()).any(|(i, d)| i >= d) {
            return Err(PyValueError::new_err(format!("index {index:?} out of range for dims {:?}", self.0.dims())));
        }
        Ok(self.0.get(&index))
    }

    fn norm(&self) -> f64 {
        tuckercomp::tensor::frobenius_norm(&self.0)
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }

    fn __repr__(&self) -> String {
        format!("Tensor(dims={:?})", self.0.dims())
    }
}

/// Boolean observation pattern.
#[pyclass(name = "Mask", module = "tuckercomp_py", skip_from_py_object)]
#[derive(Clone)]
struct PyMask(tuckercomp::ObservationMask);

#[pymethods]
impl PyMask {
    #[new]
    fn new(dims: Vec<usize>, observed: Vec<bool>) -> PyResult<Self> {
        tuckercomp::ObservationMask::new(dims, observed).map(Self).map_err(to_py)
    }

    /// Exactly `round(sr * size)` observed entries.
    #[staticmethod]
    #[pyo3(signature = (dims, sr, seed=0))]
    fn random(dims: Vec<usize>, sr: f64, seed: u64) -> PyResult<Self> {
        io::gen_mask(&dims, sr, seed).map(Self).map_err(to_py)
    }

    #[getter]
    fn dims(&self) -> Vec<usize> {
        self.0.dims().to_vec()
    }

    #[getter]
    fn observed(&self) -> Vec<bool> {
        self.0.observed().to_vec()
    }

    fn count_observed(&self) -> usize {
        self.0.count_observed()
    }

    /// Zeroes the unobserved entries of `t`.
    fn project(&self, t: &PyTensor) -> PyResult<PyTensor> {
        self.0.project(&t.0).map(PyTensor).map_err(to_py)
    }

    fn __repr__(&self) -> String {
        format!("Mask(dims={:?}, observed={})", self.0.dims(), self.0.count_observed())
    }
}

/// Solver settings. `gamma` lists zero-based smooth modes (`None` = all);
/// `bandwidth` is `"auto"`, `"median"` or a positive number.
#[pyclass(name = "Config", module = "tuckercomp_py", skip_from_py_object)]
#[derive(Clone)]
struct PyConfig(SolverConfig);

fn parse_bandwidth(value: Option<&Bound<'_, PyAny>>) -> PyResult<Bandwidth> {
    let Some(v) = value else { return Ok(Bandwidth::Auto) };
    if let Ok(h) = v.extract::<f64>() {
        return Ok(Bandwidth::Fixed(h));
    }
    match v.extract::<String>()?.as_str() {
        "auto" => Ok(Bandwidth::Auto),
        "median" => Ok(Bandwidth::Median),
        other => Err(PyValueError::new_err(format!("unknown bandwidth {other:?}"))),
    }
}

#[pymethods]
impl PyConfig {
    #[new]
    #[pyo3(signature = (
        solver="palm", alpha=tuckercomp::config::DEFAULT_ALPHA, lam=tuckercomp::config::DEFAULT_LAMBDA,
        mu0=tuckercomp::config::DEFAULT_MU0, rho=tuckercomp::config::DEFAULT_RHO,
        tol=tuckercomp::config::DEFAULT_TOL, max_iters=tuckercomp::config::DEFAULT_MAX_ITERS,
        seed=0, gamma=None, bandwidth=None, inflate_lipschitz=false, clamp=None
    ))]
    #[allow(clippy::too_many_arguments)]
    fn new(
        solver: &str,
        alpha: f64,
        lam: f64,
        mu0: f64,
        rho: f64,
        tol: f64,
        max_iters: usize,
        seed: u64,
        gamma: Option<Vec<usize>>,
        bandwidth: Option<&Bound<'_, PyAny>>,
        inflate_lipschitz: bool,
        clamp: Option<f64>,
    ) -> PyResult<Self> {
        let cfg = SolverConfig {
            solver: solver.parse::<SolverKind>().map_err(to_py)?,
            alpha,
            lambda: lam,
            mu0,
            rho,
            tol,
            max_iters,
            seed,
            gamma,
            bandwidth: parse_bandwidth(bandwidth)?,
            inflate_lipschitz,
            clamp,
        };
        cfg.validate().map_err(to_py)?;
        Ok(Self(cfg))
    }

    #[getter]
    fn solver(&self) -> String {
        self.0.solver.to_string()
    }

    #[getter]
    fn alpha(&self) -> f64 {
        self.0.alpha
    }

    #[getter]
    fn lam(&self) -> f64 {
        self.0.lambda
    }

    #[getter]
    fn seed(&self) -> u64 {
        self.0.seed
    }

    fn __repr__(&self) -> String {
        format!("{:?}", self.0)
    }
}

/// Result of `complete`.
#[pyclass(name = "Completion", module = "tuckercomp_py")]
struct PyCompletion(tuckercomp::Completion);

#[pymethods]
impl PyCompletion {
    #[getter]
    fn estimate(&self) -> PyTensor {
        PyTensor(self.0.estimate.clone())
    }

    #[getter]
    fn core(&self) -> PyTensor {
        PyTensor(self.0.core.clone())
    }

    /// Factor matrices as lists of rows.
    #[getter]
    fn factors(&self) -> Vec<Vec<Vec<f64>>> {
        self.0.factors.iter().map(|u| (0..u.rows()).map(|i| u.row(i)).collect()).collect()
    }

    #[getter]
    fn iterations(&self) -> usize {
        self.0.report.iterations
    }

    #[getter]
    fn termination(&self) -> String {
        serde_json::to_value(self.0.report.termination).unwrap().as_str().unwrap().to_owned()
    }

    /// Per-iteration objective values.
    #[getter]
    fn objective(&self) -> Vec<f64> {
        self.0.report.trace.iter().map(|e| e.objective).collect()
    }

    /// The full run report as JSON, without timing fields.
    fn report_json(&self) -> String {
        let mut report = self.0.report.clone();
        report.strip_timing();
        serde_json::to_string_pretty(&report).unwrap()
    }
}

/// Completes `t_obs` from the entries flagged in `mask`.
#[pyfunction]
#[pyo3(signature = (t_obs, mask, config=None, truth=None))]
fn complete(
    py: Python<'_>,
    t_obs: &PyTensor,
    mask: &PyMask,
    config: Option<&PyConfig>,
    truth: Option<&PyTensor>,
) -> PyResult<PyCompletion> {
    let cfg = config.map(|c| c.0.clone()).unwrap_or_default();
    let t_obs = mask.0.project(&t_obs.0).map_err(to_py)?;
    let (mask, truth) = (mask.0.clone(), truth.map(|t| t.0.clone()));
    py.detach(|| tuckercomp::complete(&t_obs, &mask, &cfg, truth.as_ref())).map(PyCompletion).map_err(to_py)
}

/// Observed entries kept, missing entries set to the observed mean.
#[pyfunction]
fn mean_fill(t_obs: &PyTensor, mask: &PyMask) -> PyResult<PyTensor> {
    tuckercomp::mean_fill(&t_obs.0, &mask.0).map(PyTensor).map_err(to_py)
}

/// Quality metrics as a JSON object string (`"inf"` for exact fits).
#[pyfunction]
fn quality(est: &PyTensor, truth: &PyTensor, mask: &PyMask) -> PyResult<String> {
    let q = tuckercomp::QualityReport::evaluate(&est.0, &truth.0, &mask.0).map_err(to_py)?;
    Ok(serde_json::to_string(&q).unwrap())
}

#[pyfunction]
fn rse(est: &PyTensor, truth: &PyTensor) -> PyResult<f64> {
    tuckercomp::metrics::rse(&est.0, &truth.0).map_err(to_py)
}

#[pyfunction]
fn mpsnr(est: &PyTensor, truth: &PyTensor, mask: &PyMask) -> PyResult<f64> {
    tuckercomp::metrics::mpsnr(&est.0, &truth.0, &mask.0).map_err(to_py)
}

#[pyfunction]
fn mssim(est: &PyTensor, truth: &PyTensor) -> PyResult<f64> {
    tuckercomp::metrics::mssim(&est.0, &truth.0).map_err(to_py)
}

/// Sum of Gaussian bumps on a regular grid.
#[pyfunction]
#[pyo3(signature = (dims, bumps=3, width=0.2, seed=0))]
fn synthetic(dims: Vec<usize>, bumps: usize, width: f64, seed: u64) -> PyResult<PyTensor> {
    io::gen_synthetic(&SyntheticSpec { dims, num_bumps: bumps, width, seed }).map(PyTensor).map_err(to_py)
}

#[pyfunction]
fn read_tensor(path: &str) -> PyResult<PyTensor> {
    io::read_tensor(path).map(PyTensor).map_err(to_py)
}

#[pyfunction]
fn write_tensor(t: &PyTensor, path: &str) -> PyResult<()> {
    io::write_tensor(&t.0, path).map_err(to_py)
}

#[pyfunction]
fn read_mask(path: &str) -> PyResult<PyMask> {
    io::read_mask(path).map(PyMask).map_err(to_py)
}

#[pyfunction]
fn write_mask(mask: &PyMask, path: &str) -> PyResult<()> {
    io::write_mask(&mask.0, path).map_err(to_py)
}

#[pyfunction]
fn read_ppm(path: &str) -> PyResult<PyTensor> {
    io::read_ppm(path).map(PyTensor).map_err(to_py)
}

#[pyfunction]
fn write_ppm(t: &PyTensor, path: &str) -> PyResult<()> {
    io::write_ppm(&t.0, path).map_err(to_py)
}

#[pymodule]
fn tuckercomp_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyTensor>()?;
    m.add_class::<PyMask>()?;
    m.add_class::<PyConfig>()?;
    m.add_class::<PyCompletion>()?;
    m.add_function(wrap_pyfunction!(complete, m)?)?;
    m.add_function(wrap_pyfunction!(mean_fill, m)?)?;
    m.add_function(wrap_pyfunction!(quality, m)?)?;
    m.add_function(wrap_pyfunction!(rse, m)?)?;
    m.add_function(wrap_pyfunction!(mpsnr, m)?)?;
    m.add_function(wrap_pyfunction!(mssim, m)?)?;
    m.add_function(wrap_pyfunction!(synthetic, m)?)?;
    m.add_function(wrap_pyfunction!(read_tensor, m)?)?;
    m.add_function(wrap_pyfunction!(write_tensor, m)?)?;
    m.add_function(wrap_pyfunction!(read_mask, m)?)?;
    m.add_function(wrap_pyfunction!(write_mask, m)?)?;
    m.add_function(wrap_pyfunction!(read_ppm, m)?)?;
    m.add_function(wrap_pyfunction!(write_ppm, m)?)?;
    Ok(())
}
