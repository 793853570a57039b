//! Python bindings: `import freqid`.

use num_complex::Complex64 as C64;
use pyo3::exceptions::{PyIOError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use ::freqid::identify::{self as ident, Model};
use ::freqid::kernels::{Axis, KernelSpec};
use ::freqid::problem::{self, FrequencyPartition};
use ::freqid::qcqp::SolverConfig;
use ::freqid::signals::{self, Dataset as CoreDataset, DiscreteInput, Input};
use ::freqid::{sim, Error};

fn to_py(e: Error) -> PyErr {
    match e.exit_code() {
        2 => PyValueError::new_err(e.to_string()),
        3 => PyIOError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn axis(name: &str) -> PyResult<Axis> {
    name.parse().map_err(to_py)
}

/// TC kernel. `decay` is alpha (discrete) or beta (continuous).
#[pyclass(name = "Kernel", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyKernel {
    inner: KernelSpec,
}

#[pymethods]
impl PyKernel {
    #[new]
    #[pyo3(signature = (axis_name, decay, gamma = 1.0))]
    fn new(axis_name: &str, decay: f64, gamma: f64) -> PyResult<Self> {
        Ok(PyKernel { inner: KernelSpec::new(axis(axis_name)?, decay, gamma).map_err(to_py)? })
    }

    #[getter]
    fn axis(&self) -> &'static str {
        self.inner.axis().name()
    }

    #[getter]
    fn decay(&self) -> f64 {
        self.inner.decay()
    }

    #[getter]
    fn gamma(&self) -> f64 {
        self.inner.gamma()
    }

    fn __call__(&self, s: f64, t: f64) -> PyResult<f64> {
        ::freqid::kernels::kernel_eval(&self.inner, s, t).map_err(to_py)
    }

    /// `(mu0, mu1)`.
    fn moments(&self) -> (f64, f64) {
        let m = ::freqid::kernels::moments(&self.inner);
        (m.mu0, m.mu1)
    }

    fn __repr__(&self) -> String {
        format!("Kernel('{}', decay={}, gamma={})", self.axis(), self.decay(), self.gamma())
    }
}

/// Input/output samples.
#[pyclass(name = "Dataset", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyDataset {
    inner: CoreDataset,
}

#[pymethods]
impl PyDataset {
    /// Discrete dataset from input samples and outputs at `t = 0, 1, ...`.
    #[staticmethod]
    fn discrete(u: Vec<f64>, y: Vec<f64>) -> PyResult<Self> {
        let input = Input::Discrete(DiscreteInput::new(u).map_err(to_py)?);
        let t = (0..y.len()).map(|k| k as f64).collect();
        Ok(PyDataset { inner: CoreDataset::new(input, t, y).map_err(to_py)? })
    }

    /// Continuous dataset from input breakpoints and levels and sampled outputs.
    #[staticmethod]
    fn piecewise(breakpoints: Vec<f64>, levels: Vec<f64>, t: Vec<f64>, y: Vec<f64>) -> PyResult<Self> {
        let u = signals::PiecewiseConstantInput::new(breakpoints, levels).map_err(to_py)?;
        Ok(PyDataset { inner: CoreDataset::new(Input::PiecewiseConstant(u), t, y).map_err(to_py)? })
    }

    #[staticmethod]
    #[pyo3(signature = (path, axis_name, input_path = None))]
    fn load(path: &str, axis_name: &str, input_path: Option<&str>) -> PyResult<Self> {
        let d = signals::load_dataset(path.as_ref(), axis(axis_name)?, input_path.map(|p| p.as_ref())).map_err(to_py)?;
        Ok(PyDataset { inner: d })
    }

    fn save(&self, path: &str) -> PyResult<()> {
        signals::save_dataset(&self.inner, path.as_ref()).map_err(to_py)
    }

    #[getter]
    fn axis(&self) -> &'static str {
        self.inner.axis().name()
    }

    #[getter]
    fn times(&self) -> Vec<f64> {
        self.inner.sample_times().to_vec()
    }

    #[getter]
    fn outputs(&self) -> Vec<f64> {
        self.inner.outputs().to_vec()
    }

    fn __len__(&self) -> usize {
        self.inner.n_d()
    }

    /// Input value at time `t`.
    fn input_at(&self, t: f64) -> f64 {
        self.inner.input().at(t)
    }
}

/// Identified impulse response model.
#[pyclass(name = "Model", frozen)]
struct PyModel {
    inner: Model,
}

#[pymethods]
impl PyModel {
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(PyModel { inner: Model::from_json(text).map_err(to_py)? })
    }

    fn to_json(&self) -> String {
        self.inner.to_json()
    }

    #[getter]
    fn coefficients(&self) -> Vec<f64> {
        self.inner.x.clone()
    }

    #[getter]
    fn active_frequencies(&self) -> Vec<f64> {
        self.inner.active.clone()
    }

    #[getter]
    fn certified(&self) -> bool {
        self.inner.certified
    }

    #[getter]
    fn iterations(&self) -> usize {
        self.inner.report.iterations
    }

    #[getter]
    fn rkhs_norm_sq(&self) -> f64 {
        self.inner.rkhs_norm_sq
    }

    fn frequency_response(&self, omegas: Vec<f64>) -> PyResult<Vec<C64>> {
        self.inner.frequency_response_grid(&omegas).map_err(to_py)
    }

    fn impulse_response(&self, times: Vec<f64>) -> PyResult<Vec<f64>> {
        self.inner.impulse_response_grid(&times).map_err(to_py)
    }

    fn predict(&self, times: Vec<f64>) -> PyResult<Vec<f64>> {
        self.inner.predict(&times).map_err(to_py)
    }

    /// `(sup |G|, argmax)` over a uniform grid of `n` intervals on `[0, omega_max]`.
    fn hinf_grid_sup(&self, omega_max: f64, n: usize) -> PyResult<(f64, f64)> {
        let grid = problem::uniform_partition(omega_max, n).map_err(to_py)?;
        let c = ident::hinf_grid_sup(&self.inner, &grid).map_err(to_py)?;
        Ok((c.grid_sup, c.argmax))
    }
}

fn partition(spec: &KernelSpec, d: &CoreDataset, lambda: f64, n_p: usize, omega_max: Option<f64>) -> PyResult<FrequencyPartition> {
    let w = match omega_max {
        Some(w) => w,
        None => problem::omega_max(spec, d.outputs(), lambda).map_err(to_py)?,
    };
    problem::uniform_partition(w, n_p).map_err(to_py)
}

/// Constrained identification on a uniform partition with `n_p` intervals.
#[pyfunction]
#[pyo3(signature = (data, kernel, lam, eps, n_p, omega_max = None, rho = 1.0))]
fn identify(data: &PyDataset, kernel: &PyKernel, lam: f64, eps: f64, n_p: usize, omega_max: Option<f64>, rho: f64) -> PyResult<PyModel> {
    let d = signals::scale_outputs(&data.inner, rho).map_err(to_py)?;
    let p = partition(&kernel.inner, &d, lam, n_p, omega_max)?;
    let mut m = ident::identify(&d, &kernel.inner, &p, lam, eps, &SolverConfig::default()).map_err(to_py)?;
    m.rho = rho;
    Ok(PyModel { inner: m })
}

/// Unconstrained kernel ridge estimate.
#[pyfunction]
fn identify_ridge(data: &PyDataset, kernel: &PyKernel, lam: f64) -> PyResult<PyModel> {
    Ok(PyModel { inner: ident::identify_ridge(&data.inner, &kernel.inner, lam).map_err(to_py)? })
}

/// Dataset from a built-in system (`example1` or `example3`).
#[pyfunction]
#[pyo3(signature = (system, n, snr_db = f64::INFINITY, seed = 0))]
fn simulate_example(system: &str, n: usize, snr_db: f64, seed: u64) -> PyResult<PyDataset> {
    let tf = sim::example_system(system).map_err(to_py)?;
    let d = match tf.axis {
        Axis::Discrete => sim::white_noise_experiment(&tf, n, snr_db, seed),
        Axis::Continuous => sim::switching_experiment(&tf, n, 0.04, snr_db, seed),
    }
    .map_err(to_py)?;
    Ok(PyDataset { inner: d })
}

/// Impulse response of a built-in system on a time grid.
#[pyfunction]
fn example_impulse_response(system: &str, times: Vec<f64>) -> PyResult<Vec<f64>> {
    let tf = sim::example_system(system).map_err(to_py)?;
    sim::impulse_response_of(&tf, &times).map_err(to_py)
}

/// `100 (1 - |g_hat - g| / |g|)`.
#[pyfunction]
fn fit(g_hat: Vec<f64>, g_true: Vec<f64>) -> PyResult<f64> {
    ident::fit(&g_hat, &g_true).map_err(to_py)
}

/// Largest certified partition mesh.
#[pyfunction]
fn mesh_bound(kernel: &PyKernel, y: Vec<f64>, lam: f64, eps: f64) -> PyResult<f64> {
    problem::mesh_bound(&kernel.inner, &y, lam, eps).map_err(to_py)
}

#[pymodule]
#[pyo3(name = "freqid")]
fn freqid_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyKernel>()?;
    m.add_class::<PyDataset>()?;
    m.add_class::<PyModel>()?;
    m.add_function(wrap_pyfunction!(identify, m)?)?;
    m.add_function(wrap_pyfunction!(identify_ridge, m)?)?;
    m.add_function(wrap_pyfunction!(simulate_example, m)?)?;
    m.add_function(wrap_pyfunction!(example_impulse_response, m)?)?;
    m.add_function(wrap_pyfunction!(fit, m)?)?;
    m.add_function(wrap_pyfunction!(mesh_bound, m)?)?;
    Ok(())
}
