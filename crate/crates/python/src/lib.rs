//! Python module `kge_ewi`: grids, problems, the EWI and RK4 integrators, weight
//! tables and the study runners.

use num_complex::Complex64;
use pyo3::exceptions::PyException;
use pyo3::prelude::*;
use pyo3::types::PyDict;

use kge_core::grid::{embed, h1_norm};
use kge_core::harness::{
    compute_reference as core_compute_reference, run_energy_trace, run_spatial_study, run_stability_study,
    run_temporal_study, CacheStatus, Method, RunConfig,
};
use kge_core::{
    build_weight_table, energy as core_energy, forward_dft, initial_state as core_initial_state,
    integrate as core_integrate, integrate_rk4, inverse_dft, moment_integrals as core_moments, spectral_derivative,
    GridSpec, KgeError as CoreError, KgeProblem, RealField, SolverState, SpectralField,
};

pyo3::create_exception!(
    kge_ewi,
    KgeError,
    PyException,
    "Raised for invalid input, instability or cache failures."
);

fn err(e: CoreError) -> PyErr {
    KgeError::new_err(e.to_string())
}

/// Uniform periodic grid on `[a, b]` with `m` points.
#[pyclass(name = "Grid", frozen)]
struct PyGrid {
    inner: GridSpec,
}

#[pymethods]
impl PyGrid {
    #[new]
    fn new(a: f64, b: f64, m: usize) -> PyResult<Self> {
        Ok(Self {
            inner: GridSpec::new(a, b, m).map_err(err)?,
        })
    }

    #[staticmethod]
    fn with_mesh_size(a: f64, b: f64, h: f64) -> PyResult<Self> {
        Ok(Self {
            inner: GridSpec::with_mesh_size(a, b, h).map_err(err)?,
        })
    }

    #[getter]
    fn a(&self) -> f64 {
        self.inner.a()
    }

    #[getter]
    fn b(&self) -> f64 {
        self.inner.b()
    }

    #[getter]
    fn m(&self) -> usize {
        self.inner.m()
    }

    #[getter]
    fn h(&self) -> f64 {
        self.inner.h()
    }

    /// Nodes `x_0..x_M` (both endpoints).
    fn nodes(&self) -> Vec<f64> {
        self.inner.nodes()
    }

    /// Fourier coefficients of real grid values, in FFT order.
    fn forward(&self, values: Vec<f64>) -> PyResult<Vec<Complex64>> {
        Ok(forward_dft(&self.inner, &RealField::new(values))
            .map_err(err)?
            .into_inner())
    }

    /// Real grid values of a coefficient vector.
    fn inverse(&self, coeffs: Vec<Complex64>) -> PyResult<Vec<f64>> {
        Ok(inverse_dft(&self.inner, &SpectralField::new(coeffs))
            .map_err(err)?
            .into_inner())
    }

    fn derivative(&self, coeffs: Vec<Complex64>, order: u32) -> PyResult<Vec<Complex64>> {
        Ok(spectral_derivative(&self.inner, &SpectralField::new(coeffs), order)
            .map_err(err)?
            .into_inner())
    }

    fn h1_norm(&self, coeffs: Vec<Complex64>) -> PyResult<f64> {
        if coeffs.len() != self.inner.m() {
            return Err(err(CoreError::LengthMismatch {
                expected: self.inner.m(),
                found: coeffs.len(),
            }));
        }
        Ok(h1_norm(&self.inner, &SpectralField::new(coeffs)))
    }

    fn __repr__(&self) -> String {
        format!("Grid(a={}, b={}, m={})", self.inner.a(), self.inner.b(), self.inner.m())
    }
}

/// Klein-Gordon problem with cubic (or constant) nonlinearity and Gaussian initial data.
#[pyclass(name = "Problem", frozen)]
struct PyProblem {
    inner: KgeProblem,
}

#[pymethods]
impl PyProblem {
    #[new]
    #[pyo3(signature = (epsilon, lam = 1.0, phi1_amplitude = 2.0, phi2_amplitude = 3.0, constant = None))]
    fn new(epsilon: f64, lam: f64, phi1_amplitude: f64, phi2_amplitude: f64, constant: Option<f64>) -> PyResult<Self> {
        use kge_core::{ConstantNonlinearity, CubicNonlinearity, InitialData, Nonlinearity};
        use std::sync::Arc;
        let f: Arc<dyn Nonlinearity> = match constant {
            Some(value) => Arc::new(ConstantNonlinearity { value }),
            None => Arc::new(CubicNonlinearity::new(lam)),
        };
        let inner = KgeProblem::new(
            epsilon,
            f,
            InitialData::gaussian(phi1_amplitude),
            InitialData::gaussian(phi2_amplitude),
        )
        .map_err(err)?;
        Ok(Self { inner })
    }

    #[getter]
    fn epsilon(&self) -> f64 {
        self.inner.epsilon()
    }

    fn describe(&self) -> String {
        self.inner.describe()
    }

    fn __repr__(&self) -> String {
        format!("Problem({})", self.inner.describe())
    }
}

/// Solution level: Fourier coefficients of `u` and `u_t` at time `t`.
#[pyclass(name = "State", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyState {
    inner: SolverState,
}

#[pymethods]
impl PyState {
    #[getter]
    fn t(&self) -> f64 {
        self.inner.t
    }

    #[getter]
    fn u(&self) -> Vec<Complex64> {
        self.inner.u.coeffs().to_vec()
    }

    #[getter]
    fn udot(&self) -> Vec<Complex64> {
        self.inner.udot.coeffs().to_vec()
    }

    /// Grid values `(u, u_t)`.
    fn values(&self, grid: PyRef<'_, PyGrid>) -> PyResult<(Vec<f64>, Vec<f64>)> {
        let g = &grid.inner;
        Ok((
            inverse_dft(g, &self.inner.u).map_err(err)?.into_inner(),
            inverse_dft(g, &self.inner.udot).map_err(err)?.into_inner(),
        ))
    }

    fn __repr__(&self) -> String {
        format!("State(t={}, m={})", self.inner.t, self.inner.u.len())
    }
}

fn parse_method(method: &str) -> PyResult<Method> {
    method.parse().map_err(err)
}

#[pyfunction]
fn initial_state(problem: PyRef<'_, PyProblem>, grid: PyRef<'_, PyGrid>) -> PyState {
    PyState {
        inner: core_initial_state(&problem.inner, &grid.inner),
    }
}

/// Discrete energy of a state.
#[pyfunction]
fn energy(problem: PyRef<'_, PyProblem>, grid: PyRef<'_, PyGrid>, state: PyRef<'_, PyState>) -> PyResult<f64> {
    core_energy(&problem.inner, &grid.inner, &state.inner).map_err(err)
}

/// Integrates from the initial data to `t_final` with `method` in {ewi2, ewi4, ewi6, rk4}.
#[pyfunction]
#[pyo3(signature = (problem, grid, tau, t_final, method = "ewi4"))]
fn integrate(
    py: Python<'_>,
    problem: PyRef<'_, PyProblem>,
    grid: PyRef<'_, PyGrid>,
    tau: f64,
    t_final: f64,
    method: &str,
) -> PyResult<PyState> {
    let method = parse_method(method)?;
    let (p, g) = (problem.inner.clone(), grid.inner.clone());
    let state = py
        .detach(move || match method {
            Method::Ewi(order) => core_integrate(&p, &g, tau, t_final, order, None),
            Method::Rk4 => integrate_rk4(&p, &g, tau, t_final, None),
        })
        .map_err(err)?;
    Ok(PyState { inner: state })
}

/// H1 error of `state` (on `grid`) against `reference` (on the finer or equal `reference_grid`).
#[pyfunction]
fn h1_error(
    grid: PyRef<'_, PyGrid>,
    state: PyRef<'_, PyState>,
    reference_grid: PyRef<'_, PyGrid>,
    reference: PyRef<'_, PyState>,
) -> PyResult<f64> {
    let u = embed(&grid.inner, &state.inner.u, &reference_grid.inner).map_err(err)?;
    Ok(h1_norm(&reference_grid.inner, &u.sub(&reference.inner.u)))
}

/// Moment integrals `(S_0..S_m, C_0..C_m)` for one frequency.
#[pyfunction]
fn moment_integrals(omega: f64, tau: f64, m_max: usize) -> PyResult<(Vec<f64>, Vec<f64>)> {
    let t = core_moments(omega, tau, m_max).map_err(err)?;
    Ok((t.s, t.c))
}

/// Per-mode weights of the given order as a dict of lists.
#[pyfunction]
fn weight_table<'py>(
    py: Python<'py>,
    grid: PyRef<'_, PyGrid>,
    epsilon: f64,
    tau: f64,
    order: u32,
) -> PyResult<Bound<'py, PyDict>> {
    let order = kge_core::EwiOrder::from_order(order).map_err(err)?;
    let w = build_weight_table(&grid.inner, epsilon, tau, order).map_err(err)?;
    let d = PyDict::new(py);
    d.set_item("omega", w.omega().to_vec())?;
    d.set_item("cos", w.cos().to_vec())?;
    d.set_item("sin", w.sin().to_vec())?;
    let top = order.max_taylor();
    let rows = |f: &dyn Fn(usize) -> Option<Vec<f64>>, step: usize| -> Vec<Vec<f64>> {
        (0..=top).step_by(step).filter_map(f).collect()
    };
    d.set_item("a", rows(&|m| w.a(m).map(<[f64]>::to_vec), 2))?;
    d.set_item("adot", rows(&|m| w.adot(m).map(<[f64]>::to_vec), 2))?;
    d.set_item("b", rows(&|m| w.b(m).map(<[f64]>::to_vec), 1))?;
    d.set_item("bdot", rows(&|m| w.bdot(m).map(<[f64]>::to_vec), 1))?;
    Ok(d)
}

/// Runs a `temporal`, `spatial` or `stability` study from TOML config text; returns one dict per cell.
#[pyfunction]
fn run_study<'py>(py: Python<'py>, kind: &str, config_toml: &str) -> PyResult<Vec<Bound<'py, PyDict>>> {
    let cfg = RunConfig::from_toml_str(config_toml).map_err(err)?;
    let runner = match kind {
        "temporal" => run_temporal_study,
        "spatial" => run_spatial_study,
        "stability" => run_stability_study,
        other => return Err(KgeError::new_err(format!("unknown study kind `{other}`"))),
    };
    let records = py.detach(move || runner(&cfg)).map_err(err)?;
    records
        .into_iter()
        .map(|r| {
            let d = PyDict::new(py);
            d.set_item("epsilon", r.epsilon)?;
            d.set_item("tau", r.tau)?;
            d.set_item("h", r.h)?;
            d.set_item("method", r.method)?;
            d.set_item("order", r.order)?;
            d.set_item("h1_error", r.h1_error)?;
            d.set_item("rate", r.rate)?;
            d.set_item("wall_time_s", r.wall_time_s)?;
            d.set_item("max_energy_rel_error", r.max_energy_rel_error)?;
            Ok(d)
        })
        .collect()
}

/// Energy traces from TOML config text: one dict per run with `t`, `energy`, `rel_error` lists.
#[pyfunction]
fn energy_trace<'py>(py: Python<'py>, config_toml: &str) -> PyResult<Vec<Bound<'py, PyDict>>> {
    let cfg = RunConfig::from_toml_str(config_toml).map_err(err)?;
    let traces = py.detach(move || run_energy_trace(&cfg)).map_err(err)?;
    traces
        .into_iter()
        .map(|t| {
            let d = PyDict::new(py);
            d.set_item("method", &t.method)?;
            d.set_item("order", t.order)?;
            d.set_item("epsilon", t.epsilon)?;
            d.set_item("tau", t.tau)?;
            d.set_item("t", t.rows.iter().map(|r| r.t).collect::<Vec<_>>())?;
            d.set_item("energy", t.rows.iter().map(|r| r.energy).collect::<Vec<_>>())?;
            d.set_item("rel_error", t.rows.iter().map(|r| r.rel_error).collect::<Vec<_>>())?;
            d.set_item("aborted_at", t.aborted_at)?;
            Ok(d)
        })
        .collect()
}

/// Loads or computes the cached reference for the base epsilon of a TOML config.
/// Returns `(status, path, state)`.
#[pyfunction]
fn compute_reference(py: Python<'_>, config_toml: &str) -> PyResult<(String, Option<String>, PyState)> {
    let cfg = RunConfig::from_toml_str(config_toml).map_err(err)?;
    let out = py.detach(move || core_compute_reference(&cfg)).map_err(err)?;
    let status = match out.status {
        CacheStatus::Hit => "hit".to_string(),
        CacheStatus::Generated => "generated".to_string(),
        CacheStatus::Regenerated(why) => format!("regenerated: {why}"),
        CacheStatus::Uncached => "uncached".to_string(),
    };
    Ok((
        status,
        out.path.map(|p| p.display().to_string()),
        PyState {
            inner: out.solution.state,
        },
    ))
}

#[pymodule]
fn kge_ewi(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("KgeError", m.py().get_type::<KgeError>())?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_class::<PyGrid>()?;
    m.add_class::<PyProblem>()?;
    m.add_class::<PyState>()?;
    m.add_function(wrap_pyfunction!(initial_state, m)?)?;
    m.add_function(wrap_pyfunction!(energy, m)?)?;
    m.add_function(wrap_pyfunction!(integrate, m)?)?;
    m.add_function(wrap_pyfunction!(h1_error, m)?)?;
    m.add_function(wrap_pyfunction!(moment_integrals, m)?)?;
    m.add_function(wrap_pyfunction!(weight_table, m)?)?;
    m.add_function(wrap_pyfunction!(run_study, m)?)?;
    m.add_function(wrap_pyfunction!(energy_trace, m)?)?;
    m.add_function(wrap_pyfunction!(compute_reference, m)?)?;
    Ok(())
}
