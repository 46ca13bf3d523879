//! Python bindings for `slowproj`.
//!
//! Vectors cross the boundary as lists of Python `complex`, matrices as lists
//! of rows.

use num_complex::Complex64;
use pyo3::create_exception;
use pyo3::exceptions::{PyException, PyValueError};
use pyo3::prelude::*;

use slowproj::error_functional::{self, ErrorBreakdown, ErrorFunctional, QuadratureConfig};
use slowproj::linalg::{ComplexMatrix, ComplexVector};
use slowproj::models::{self, GradParams, ShearParams};
use slowproj::projection::{self, Dop, Method, ProjectionOperator};
use slowproj::spectral::{self, LinearSystem, SlowBasis, SpectralData};
use slowproj::trajectory::{self, TimeGrid, Trajectory};

create_exception!(slowproj, SlowprojError, PyException);

fn err(e: slowproj::Error) -> PyErr {
    SlowprojError::new_err(e.to_string())
}

fn vector(values: Vec<Complex64>) -> ComplexVector {
    ComplexVector::from_vec(values)
}

fn rows(m: &ComplexMatrix) -> Vec<Vec<Complex64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

fn states(t: &Trajectory) -> Vec<Vec<Complex64>> {
    t.states.iter().map(|x| x.iter().copied().collect()).collect()
}

fn method(name: &str) -> PyResult<Method> {
    name.parse()
        .map_err(|_| PyValueError::new_err(format!("unknown method {name:?}")))
}

/// Breakdown of the error functional.
#[pyclass(frozen, get_all)]
struct Breakdown {
    e_inter: f64,
    e_trans: f64,
    e_const: f64,
    total: f64,
}

impl From<ErrorBreakdown> for Breakdown {
    fn from(b: ErrorBreakdown) -> Self {
        Self {
            e_inter: b.e_inter,
            e_trans: b.e_trans,
            e_const: b.e_const,
            total: b.total,
        }
    }
}

#[pymethods]
impl Breakdown {
    fn __repr__(&self) -> String {
        format!(
            "Breakdown(e_inter={}, e_trans={}, e_const={}, total={})",
            self.e_inter, self.e_trans, self.e_const, self.total
        )
    }
}

/// A stable linear system `dx/dt = L x` with its spectral data and a
/// default slow-subspace dimension.
#[pyclass(frozen)]
struct System {
    data: SpectralData,
    slow_count: usize,
    grad: Option<GradParams>,
}

impl System {
    fn build(system: LinearSystem, slow_count: usize, grad: Option<GradParams>) -> PyResult<Self> {
        let data = spectral::analyze(&system).map_err(err)?;
        spectral::assert_stable(&data).map_err(err)?;
        if slow_count == 0 || slow_count > data.dim() {
            return Err(PyValueError::new_err(format!(
                "slow count {slow_count} outside 1..={}",
                data.dim()
            )));
        }
        Ok(Self {
            data,
            slow_count,
            grad,
        })
    }

    fn count(&self, n: Option<usize>) -> usize {
        n.unwrap_or(self.slow_count)
    }

    fn basis(&self, n: Option<usize>) -> PyResult<SlowBasis> {
        spectral::slow_basis(&self.data, self.count(n)).map_err(err)
    }

    fn operator(&self, m: Method, n: Option<usize>) -> PyResult<ProjectionOperator> {
        let basis = self.basis(n)?;
        match m {
            Method::Dop => projection::dop_matrix(&self.data.system, &basis),
            Method::Orthogonal => projection::orthogonal_projection(&basis),
            Method::Riesz => projection::riesz_projection(&self.data, self.count(n)),
        }
        .map_err(err)
    }

    fn grid(t_end: f64, samples: usize) -> PyResult<TimeGrid> {
        TimeGrid::new(t_end, samples).map_err(err)
    }

    fn functional(&self, x0: Vec<Complex64>, n: Option<usize>) -> PyResult<ErrorFunctional> {
        ErrorFunctional::new(&self.data.system, &self.basis(n)?, &vector(x0)).map_err(err)
    }
}

#[pymethods]
impl System {
    /// Two-dimensional shear flow model.
    #[staticmethod]
    #[pyo3(signature = (alpha = 5.0, gamma = 1.0))]
    fn shear2d(alpha: f64, gamma: f64) -> PyResult<Self> {
        let p = ShearParams::new(alpha, gamma).map_err(err)?;
        Self::build(models::shear2d(p), 1, None)
    }

    /// Linearized three-moment Grad system at wavenumber `k`.
    #[staticmethod]
    #[pyo3(signature = (epsilon = 0.1, k = 1.0))]
    fn grad3(epsilon: f64, k: f64) -> PyResult<Self> {
        let p = GradParams::new(epsilon, k).map_err(err)?;
        Self::build(models::grad3(p), 2, Some(p))
    }

    /// User-supplied matrix given as a list of rows.
    #[staticmethod]
    #[pyo3(signature = (matrix, slow_count = 1, label = "custom"))]
    fn from_matrix(matrix: Vec<Vec<Complex64>>, slow_count: usize, label: &str) -> PyResult<Self> {
        let d = matrix.len();
        if d == 0 || matrix.iter().any(|r| r.len() != d) {
            return Err(PyValueError::new_err("matrix must be square and non-empty"));
        }
        let m = ComplexMatrix::from_row_iterator(d, d, matrix.into_iter().flatten());
        Self::build(LinearSystem::new(m, label).map_err(err)?, slow_count, None)
    }

    #[getter]
    fn dim(&self) -> usize {
        self.data.dim()
    }

    #[getter]
    fn slow_count(&self) -> usize {
        self.slow_count
    }

    #[getter]
    fn label(&self) -> String {
        self.data.system.label.clone()
    }

    #[getter]
    fn matrix(&self) -> Vec<Vec<Complex64>> {
        rows(self.data.system.matrix())
    }

    /// Eigenvalues, slowest first.
    #[getter]
    fn eigenvalues(&self) -> Vec<Complex64> {
        self.data.eigenvalues().to_vec()
    }

    #[getter]
    fn spectral_abscissa(&self) -> f64 {
        self.data.spectral_abscissa
    }

    #[getter]
    fn non_normality(&self) -> f64 {
        spectral::non_normality(&self.data.system)
    }

    /// Slow eigenvectors as a list of vectors.
    #[pyo3(signature = (n = None))]
    fn slow_basis(&self, n: Option<usize>) -> PyResult<Vec<Vec<Complex64>>> {
        Ok(self
            .basis(n)?
            .vectors
            .iter()
            .map(|v| v.iter().copied().collect())
            .collect())
    }

    /// The unit slow-orthogonal initial condition of the Grad model.
    fn slow_orthogonal(&self) -> PyResult<Vec<Complex64>> {
        let p = self
            .grad
            .ok_or_else(|| PyValueError::new_err("only defined for the grad3 model"))?;
        let v = models::grad3_slow_orthogonal_complement(p).map_err(err)?;
        Ok(v.iter().copied().collect())
    }

    /// Projection matrix for `method` in {"dop", "orth", "riesz"}.
    #[pyo3(signature = (method = "dop", n = None))]
    fn projector(&self, method: &str, n: Option<usize>) -> PyResult<Vec<Vec<Complex64>>> {
        Ok(rows(&self.operator(self::method(method)?, n)?.matrix))
    }

    /// Slow coordinates and projected state of `x0`.
    #[pyo3(signature = (x0, method = "dop", n = None))]
    fn project(
        &self,
        x0: Vec<Complex64>,
        method: &str,
        n: Option<usize>,
    ) -> PyResult<(Vec<Complex64>, Vec<Complex64>)> {
        let x0 = vector(x0);
        let m = self::method(method)?;
        let xi = if m == Method::Dop {
            Dop::new(&self.data.system, &self.basis(n)?)
                .and_then(|d| d.coordinates(&x0))
                .map_err(err)?
        } else {
            self.operator(m, n)?.coordinates(&x0).map_err(err)?
        };
        let projected = self.basis(n)?.matrix() * &xi;
        Ok((xi.iter().copied().collect(), projected.iter().copied().collect()))
    }

    /// Closed-form error functional at slow coordinates `xi`.
    #[pyo3(signature = (x0, xi, n = None))]
    fn error(&self, x0: Vec<Complex64>, xi: Vec<Complex64>, n: Option<usize>) -> PyResult<Breakdown> {
        let f = self.functional(x0, n)?;
        Ok(f.evaluate(&vector(xi)).map_err(err)?.into())
    }

    /// Minimizer of the error functional.
    #[pyo3(signature = (x0, n = None))]
    fn minimizer(&self, x0: Vec<Complex64>, n: Option<usize>) -> PyResult<Vec<Complex64>> {
        let xi = self.functional(x0, n)?.minimizer().map_err(err)?;
        Ok(xi.iter().copied().collect())
    }

    /// Error functional by direct time quadrature.
    #[pyo3(signature = (x0, xi, n = None, rel_tol = 1e-8))]
    fn quadrature_error(
        &self,
        x0: Vec<Complex64>,
        xi: Vec<Complex64>,
        n: Option<usize>,
        rel_tol: f64,
    ) -> PyResult<f64> {
        let cfg = QuadratureConfig {
            rel_tol,
            ..QuadratureConfig::default()
        };
        error_functional::quadrature_error(
            &self.data.system,
            &self.basis(n)?,
            &vector(x0),
            &vector(xi),
            cfg,
        )
        .map_err(err)
    }

    /// Full trajectory as `(times, states)`.
    #[pyo3(signature = (x0, t_end = None, samples = 501))]
    fn propagate(
        &self,
        x0: Vec<Complex64>,
        t_end: Option<f64>,
        samples: usize,
    ) -> PyResult<(Vec<f64>, Vec<Vec<Complex64>>)> {
        let t_end = t_end.unwrap_or_else(|| trajectory::default_horizon(self.data.spectral_abscissa));
        let grid = Self::grid(t_end, samples)?;
        let t = trajectory::propagate_full(&self.data, &vector(x0), &grid).map_err(err)?;
        Ok((grid.times().collect(), states(&t)))
    }

    /// Reduced trajectory started from the `method` projection of `x0`.
    #[pyo3(signature = (x0, method = "dop", n = None, t_end = None, samples = 501))]
    fn propagate_reduced(
        &self,
        x0: Vec<Complex64>,
        method: &str,
        n: Option<usize>,
        t_end: Option<f64>,
        samples: usize,
    ) -> PyResult<(Vec<f64>, Vec<Vec<Complex64>>)> {
        let (xi, _) = self.project(x0, method, n)?;
        let t_end = t_end.unwrap_or_else(|| trajectory::default_horizon(self.data.spectral_abscissa));
        let grid = Self::grid(t_end, samples)?;
        let t = trajectory::propagate_reduced(&self.basis(n)?, &vector(xi), &grid).map_err(err)?;
        Ok((grid.times().collect(), states(&t)))
    }

    fn __repr__(&self) -> String {
        format!(
            "System(label={:?}, dim={}, slow_count={})",
            self.data.system.label,
            self.data.dim(),
            self.slow_count
        )
    }
}

/// Randomized invariant checks; returns the report as a JSON string.
#[pyfunction]
#[pyo3(signature = (seed = 42, trials = 100, self_test = false))]
fn validate(py: Python<'_>, seed: u64, trials: usize, self_test: bool) -> PyResult<String> {
    let report = py
        .detach(|| slowproj::validate::run(seed, trials, self_test))
        .map_err(err)?;
    Ok(report.to_json())
}

#[pymodule]
#[pyo3(name = "slowproj")]
fn slowproj_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<System>()?;
    m.add_class::<Breakdown>()?;
    m.add_function(wrap_pyfunction!(validate, m)?)?;
    m.add("SlowprojError", m.py().get_type::<SlowprojError>())?;
    Ok(())
}
