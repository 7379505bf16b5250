//! Python bindings: generate validation fields, add noise and discover
//! equations without leaving Python. Fields cross the boundary as lists of
//! time frames.

use pyo3::create_exception;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use epde::bench::{self, SolverSettings};
use epde::solvers::Equation;
use epde::{
    add_noise, coeff_error, discover_baseline, enumerate_library, noise_level, run_epde, Differentiation,
    DiscoveredEquation, EpdeError, Factor, Grid, NoiseSpec, RunConfig, SolutionField,
};

create_exception!(epde_py, DegenerateDiscoveryError, PyValueError, "No equation could be extracted from the data.");

fn to_py(e: EpdeError) -> PyErr {
    match e {
        EpdeError::DegenerateDiscovery(_) => DegenerateDiscoveryError::new_err(e.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

/// A scalar field sampled on a uniform (t, x) grid.
#[pyclass(name = "Field", module = "epde_py", frozen, skip_from_py_object)]
#[derive(Clone)]
pub struct PyField {
    inner: SolutionField,
}

#[pymethods]
impl PyField {
    #[new]
    #[pyo3(signature = (values, dt, dx, t0=0.0, x0=0.0))]
    fn new(values: Vec<Vec<f64>>, dt: f64, dx: f64, t0: f64, x0: f64) -> PyResult<Self> {
        field_from_rows(values, dt, dx, t0, x0).map_err(to_py)
    }

    #[staticmethod]
    fn read_csv(path: &str) -> PyResult<Self> {
        SolutionField::read_csv(path).map(|inner| Self { inner }).map_err(to_py)
    }

    fn write_csv(&self, path: &str) -> PyResult<()> {
        self.inner.write_csv(path).map_err(to_py)
    }

    #[getter]
    fn shape(&self) -> (usize, usize) {
        self.inner.grid().shape()
    }

    #[getter]
    fn dt(&self) -> f64 {
        self.inner.grid().dt
    }

    #[getter]
    fn dx(&self) -> f64 {
        self.inner.grid().dx
    }

    #[getter]
    fn values(&self) -> Vec<Vec<f64>> {
        self.inner.values().rows().into_iter().map(|r| r.to_vec()).collect()
    }

    fn max_abs(&self) -> f64 {
        self.inner.max_abs()
    }

    /// Independent Gaussian noise with sigma = fraction * max|u|.
    fn with_noise(&self, fraction: f64, seed: u64) -> PyResult<Self> {
        let spec = NoiseSpec::new(fraction, seed).map_err(to_py)?;
        Ok(Self {
            inner: add_noise(&self.inner, spec),
        })
    }

    fn crop(&self, t_start: usize, nt: usize, x_start: usize, nx: usize) -> PyResult<Self> {
        self.inner.crop(t_start, nt, x_start, nx).map(|inner| Self { inner }).map_err(to_py)
    }

    fn __repr__(&self) -> String {
        let g = self.inner.grid();
        format!("Field(nt={}, nx={}, dt={}, dx={})", g.nt, g.nx, g.dt, g.dx)
    }
}

fn field_from_rows(rows: Vec<Vec<f64>>, dt: f64, dx: f64, t0: f64, x0: f64) -> epde::Result<PyField> {
    let nt = rows.len();
    let nx = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != nx) {
        return Err(EpdeError::InvalidParameter("all time frames must have the same length".into()));
    }
    let grid = Grid::with_origin(nt, nx, dt, dx, t0, x0)?;
    Ok(PyField {
        inner: SolutionField::from_vec(grid, rows.concat())?,
    })
}

/// A discovered relation `target = sum(coefficient * term)`.
#[pyclass(name = "Equation", module = "epde_py", frozen, get_all, skip_from_py_object)]
#[derive(Clone)]
pub struct PyEquation {
    target: String,
    terms: Vec<(String, f64)>,
    residual_norm: f64,
    fitness: Option<f64>,
    seed: Option<u64>,
}

impl From<&DiscoveredEquation> for PyEquation {
    fn from(eq: &DiscoveredEquation) -> Self {
        Self {
            target: eq.target.to_string(),
            terms: eq.terms.iter().map(|(t, c)| (t.to_string(), *c)).collect(),
            residual_norm: eq.residual_norm,
            fitness: eq.fitness,
            seed: eq.provenance.as_ref().filter(|p| p.method == "epde").map(|p| p.seed),
        }
    }
}

#[pymethods]
impl PyEquation {
    fn coefficient(&self, term: &str) -> Option<f64> {
        self.terms.iter().find(|(t, _)| t == term).map(|(_, c)| *c)
    }

    fn __str__(&self) -> String {
        DiscoveredEquation {
            target: self.target.parse().expect("rendered term parses"),
            terms: self
                .terms
                .iter()
                .map(|(t, c)| (t.parse().expect("rendered term parses"), *c))
                .collect(),
            residual_norm: self.residual_norm,
            fitness: None,
            provenance: None,
        }
        .render()
    }

    fn __repr__(&self) -> String {
        format!("Equation({:?})", self.__str__())
    }
}

/// Solve `equation` ("wave", "burgers" or "kdv") on its validation grid.
#[pyfunction]
#[pyo3(signature = (equation, nt=None, nx=None, dt=None, dx=None, c=None, mu=None))]
fn generate(
    py: Python<'_>,
    equation: &str,
    nt: Option<usize>,
    nx: Option<usize>,
    dt: Option<f64>,
    dx: Option<f64>,
    c: Option<f64>,
    mu: Option<f64>,
) -> PyResult<PyField> {
    let eq: Equation = equation.parse().map_err(to_py)?;
    let settings = SolverSettings { nt, nx, dt, dx, c, mu };
    py.detach(|| bench::generate(eq, &settings))
        .map(|inner| PyField { inner })
        .map_err(to_py)
}

/// Discover an equation. `config` takes the same `key = value` text as the
/// command-line `--config` file.
#[pyfunction]
#[pyo3(signature = (field, seed=0, derivatives="fd", baseline=false, config=None))]
fn discover(
    py: Python<'_>,
    field: &PyField,
    seed: u64,
    derivatives: &str,
    baseline: bool,
    config: Option<&str>,
) -> PyResult<PyEquation> {
    let mut cfg = match config {
        Some(text) => RunConfig::parse(text).map_err(to_py)?,
        None => RunConfig::default(),
    };
    let diff = match derivatives {
        "fd" => Differentiation::FiniteDifference,
        "poly" => Differentiation::DEFAULT_POLY,
        other => return Err(PyValueError::new_err(format!("unknown derivatives `{other}` (fd|poly)"))),
    };
    cfg.evolution.differentiation = diff;
    cfg.baseline.differentiation = diff;
    cfg.evolution.seed = seed;
    let data = field.inner.clone();
    let eq = py.detach(move || {
        if baseline {
            let lib = enumerate_library(&Factor::POOL, cfg.evolution.max_factors, Factor::Ut)?;
            discover_baseline(&data, &lib, &cfg.baseline)
        } else {
            run_epde(&data, &cfg.evolution)
        }
    });
    eq.map(|e| PyEquation::from(&e)).map_err(to_py)
}

/// Percentage Frobenius distance between a clean and a noisy field.
#[pyfunction(name = "noise_level")]
fn py_noise_level(clean: &PyField, noisy: &PyField) -> PyResult<f64> {
    noise_level(&clean.inner, &noisy.inner).map_err(to_py)
}

/// Euclidean distance between two coefficient vectors.
#[pyfunction(name = "coeff_error")]
fn py_coeff_error(true_w: Vec<f64>, pred_w: Vec<f64>) -> PyResult<f64> {
    coeff_error(&true_w, &pred_w).map_err(to_py)
}

#[pymodule]
fn epde_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyField>()?;
    m.add_class::<PyEquation>()?;
    m.add_function(wrap_pyfunction!(generate, m)?)?;
    m.add_function(wrap_pyfunction!(discover, m)?)?;
    m.add_function(wrap_pyfunction!(py_noise_level, m)?)?;
    m.add_function(wrap_pyfunction!(py_coeff_error, m)?)?;
    m.add("DegenerateDiscoveryError", m.py().get_type::<DegenerateDiscoveryError>())?;
    Ok(())
}
