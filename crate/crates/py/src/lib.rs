//! Python bindings. Matrices cross the boundary as nested lists.

use ndarray::Array2;
use pyo3::exceptions::{PyArithmeticError, PyValueError};
use pyo3::prelude::*;

use abelkern_core::abelian_ext::{self, DiscreteSumSpec};
use abelkern_core::analysis::{self, StudyMethod};
use abelkern_core::linalg::CMatrix;
use abelkern_core::propagation::{self, JointKernelFT, Method, DEFAULT_SAFETY};
use abelkern_core::{oracles, CoefficientRecipe, Complex64, FrequencyGrid, Profile};

fn py_err(e: abelkern_core::Error) -> PyErr {
    if e.is_numerical_guard() {
        PyArithmeticError::new_err(e.to_string())
    } else {
        PyValueError::new_err(e.to_string())
    }
}

fn rows<T: Clone>(m: &Array2<T>) -> Vec<Vec<T>> {
    m.rows().into_iter().map(|r| r.to_vec()).collect()
}

fn matrix<T: Clone>(rows: Vec<Vec<T>>) -> PyResult<Array2<T>> {
    let n = rows.len();
    let m = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != m) {
        return Err(PyValueError::new_err("rows have different lengths"));
    }
    Array2::from_shape_vec((n, m), rows.into_iter().flatten().collect())
        .map_err(|e| PyValueError::new_err(e.to_string()))
}

fn method(name: &str, safety: f64, dt: Option<f64>) -> PyResult<Method> {
    match name {
        "exact" => Ok(Method::Exact),
        "euler" => Ok(Method::Euler { dt, safety }),
        other => Err(PyValueError::new_err(format!("unknown method `{other}`"))),
    }
}

/// Periodic grid of `2^(level+1)` points on `[-half_width, half_width)`.
#[pyclass(frozen, name = "Grid")]
struct PyGrid(abelkern_core::SpatialGrid);

#[pymethods]
impl PyGrid {
    #[new]
    fn new(level: u32, half_width: f64) -> PyResult<Self> {
        abelkern_core::SpatialGrid::new(level, half_width)
            .map(Self)
            .map_err(py_err)
    }

    #[getter]
    fn level(&self) -> u32 {
        self.0.level()
    }

    #[getter]
    fn half_width(&self) -> f64 {
        self.0.half_width()
    }

    #[getter]
    fn step(&self) -> f64 {
        self.0.step()
    }

    #[getter]
    fn points(&self) -> Vec<f64> {
        self.0.points().to_vec()
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }

    fn __repr__(&self) -> String {
        format!("Grid(level={}, half_width={})", self.0.level(), self.0.half_width())
    }
}

fn profile(v: &Bound<'_, PyAny>) -> PyResult<Profile> {
    if let Ok(c) = v.extract::<f64>() {
        return Ok(Profile::constant(c));
    }
    let values: Vec<f64> = v.extract()?;
    let n = values.len();
    if n < 2 || !n.is_power_of_two() {
        return Err(PyValueError::new_err(format!(
            "tabulated profile needs 2^(m+1) values, got {n}"
        )));
    }
    Ok(Profile::Tabulated {
        level: n.trailing_zeros() - 1,
        values,
    })
}

type Samples = (Vec<f64>, Vec<f64>, Vec<f64>, Vec<f64>);
type Cube = Vec<Vec<Vec<f64>>>;
/// `(levels, steps, gaps, fitted_rate)`.
type Study = (Vec<u32>, Vec<f64>, Vec<f64>, f64);

/// Coefficient recipe `(sigma2, mu, a, b)`, sampled on demand on any grid.
#[pyclass(frozen, name = "Coefficients")]
struct PyCoefficients(CoefficientRecipe);

#[pymethods]
impl PyCoefficients {
    /// Each argument is a constant or the values on the points of one grid level.
    #[new]
    #[pyo3(signature = (sigma2, mu, a = None, b = None))]
    fn new(
        sigma2: &Bound<'_, PyAny>,
        mu: &Bound<'_, PyAny>,
        a: Option<&Bound<'_, PyAny>>,
        b: Option<&Bound<'_, PyAny>>,
    ) -> PyResult<Self> {
        let opt =
            |v: Option<&Bound<'_, PyAny>>| v.map(profile).transpose().map(|p| p.unwrap_or(Profile::constant(0.0)));
        Ok(Self(CoefficientRecipe {
            sigma2: profile(sigma2)?,
            mu: profile(mu)?,
            a: opt(a)?,
            b: opt(b)?,
            sigma2_floor: None,
        }))
    }

    #[staticmethod]
    fn smooth() -> Self {
        Self(CoefficientRecipe::smooth())
    }

    #[staticmethod]
    fn constant(sigma2: f64, mu: f64, a: f64, b: f64) -> Self {
        Self(CoefficientRecipe::constant(sigma2, mu, a, b))
    }

    /// `(sigma2, mu, a, b)` at the points of `grid`.
    fn sample(&self, grid: &PyGrid) -> PyResult<Samples> {
        let r = &self.0;
        let s = |p: &Profile| p.sample(&grid.0).map_err(py_err);
        Ok((s(&r.sigma2)?, s(&r.mu)?, s(&r.a)?, s(&r.b)?))
    }

    fn __repr__(&self) -> String {
        format!("{:?}", self.0)
    }
}

/// Frequency set of a kernel family; the layout decides how densities are
/// reconstructed.
#[pyclass(frozen, name = "Frequencies")]
struct PyFrequencies(FrequencyGrid);

#[pymethods]
impl PyFrequencies {
    /// Inverse lattice of `[-half_width, half_width)` at `level`.
    #[staticmethod]
    fn inverse_lattice(level: u32, half_width: f64) -> PyResult<Self> {
        FrequencyGrid::inverse_lattice(level, half_width)
            .map(Self)
            .map_err(py_err)
    }

    /// `count` evenly spaced real frequencies in `[-half_width, half_width]`.
    #[staticmethod]
    fn window(half_width: f64, count: usize) -> PyResult<Self> {
        FrequencyGrid::window(half_width, count).map(Self).map_err(py_err)
    }

    #[staticmethod]
    fn explicit(z: Vec<Complex64>) -> PyResult<Self> {
        FrequencyGrid::explicit(z).map(Self).map_err(py_err)
    }

    #[getter]
    fn values(&self) -> Vec<Complex64> {
        self.0.frequencies().to_vec()
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }
}

/// Fourier-transformed kernel family, one matrix per frequency.
#[pyclass(frozen, name = "JointKernel")]
struct PyJointKernel(JointKernelFT);

#[pymethods]
impl PyJointKernel {
    #[getter]
    fn t(&self) -> f64 {
        self.0.t()
    }

    #[getter]
    fn frequencies(&self) -> Vec<Complex64> {
        self.0.frequencies().frequencies().to_vec()
    }

    /// Euler step and step count, or `None` for the exact exponential.
    #[getter]
    fn euler_step(&self) -> Option<(f64, u64)> {
        self.0.scheme().map(|s| (s.dt(), s.steps()))
    }

    /// Matrix at frequency `p`, which must be one of `frequencies`; entries
    /// are densities in `x'`, so `h` times a row at `p = 0` sums to one.
    fn slice(&self, p: Complex64) -> PyResult<Vec<Vec<Complex64>>> {
        self.0
            .slice_at(p)
            .map(|s| rows(s.entries()))
            .ok_or_else(|| PyValueError::new_err(format!("{p} is not a frequency of this family")))
    }

    fn hermitian_defect(&self) -> f64 {
        self.0.hermitian_defect()
    }

    /// Joint density as `values[x][x'][k]` at `offsets[k]`; defaults to the
    /// lattice dual to the frequencies.
    #[pyo3(signature = (offsets = None))]
    fn density(&self, offsets: Option<Vec<f64>>) -> PyResult<(Vec<f64>, Cube)> {
        let offsets = match offsets {
            Some(o) => o,
            None => propagation::dual_offsets(self.0.frequencies()).map_err(py_err)?,
        };
        let d = propagation::reconstruct_joint_density(&self.0, &offsets).map_err(py_err)?;
        let v = d.values();
        let (n, m, _) = v.dim();
        let cube = (0..n)
            .map(|a| (0..m).map(|b| v.slice(ndarray::s![a, b, ..]).to_vec()).collect())
            .collect();
        Ok((d.offsets().to_vec(), cube))
    }

    fn __len__(&self) -> usize {
        self.0.frequencies().len()
    }
}

/// Fourier slice of the joint generator at `z`.
#[pyfunction]
fn generator_slice(grid: &PyGrid, coefficients: &PyCoefficients, z: Complex64) -> PyResult<Vec<Vec<Complex64>>> {
    let f = coefficients.0.sample(&grid.0).map_err(py_err)?;
    abelkern_core::generators::fourier_slice(&grid.0, &f, z)
        .map(|s| rows(s.entries()))
        .map_err(py_err)
}

#[pyfunction]
#[pyo3(signature = (grid, coefficients, t, frequencies, method = "exact", safety = DEFAULT_SAFETY, dt = None))]
fn joint_kernel(
    grid: &PyGrid,
    coefficients: &PyCoefficients,
    t: f64,
    frequencies: &PyFrequencies,
    method: &str,
    safety: f64,
    dt: Option<f64>,
) -> PyResult<PyJointKernel> {
    let f = coefficients.0.sample(&grid.0).map_err(py_err)?;
    let m = self::method(method, safety, dt)?;
    propagation::joint_kernel(&grid.0, &f, t, &frequencies.0, m)
        .map(PyJointKernel)
        .map_err(py_err)
}

/// Joint kernel of `(X_t, max_{s<=t} X_s)` from `x0`, as `values[x'][y']`
/// with `h * values` the cell probabilities.
#[pyfunction]
fn sup_kernel(grid: &PyGrid, coefficients: &PyCoefficients, t: f64, x0: f64) -> PyResult<Vec<Vec<f64>>> {
    let f = coefficients.0.sample(&grid.0).map_err(py_err)?;
    abelian_ext::sup_joint_kernel(&grid.0, &f, t, x0)
        .map(|k| rows(k.values()))
        .map_err(py_err)
}

/// L1 distance of the lattice sup kernel from the Brownian reflection law.
#[pyfunction]
fn sup_reflection_l1(grid: &PyGrid, sigma2: f64, t: f64, x0: f64) -> PyResult<f64> {
    let f = abelkern_core::CoefficientField::constant(&grid.0, sigma2, 0.0, 0.0, 0.0).map_err(py_err)?;
    abelian_ext::sup_joint_kernel(&grid.0, &f, t, x0)
        .map(|k| k.reflection_l1(sigma2))
        .map_err(py_err)
}

/// `(U o exp(-i p psi))^periods` for a one-period transition `u`.
#[pyfunction]
fn dsum_power(u: Vec<Vec<Complex64>>, psi: Vec<Vec<f64>>, p: Complex64, periods: u32) -> PyResult<Vec<Vec<Complex64>>> {
    let u: CMatrix = matrix(u)?;
    abelian_ext::dsum_power(&u, &matrix(psi)?, p, periods)
        .map(|m| rows(&m))
        .map_err(py_err)
}

/// Kernel family of `(X_t, sum_k psi(X_{k-1}, X_k))` sampled every `period`.
#[pyfunction]
#[pyo3(signature = (grid, coefficients, psi, period, periods, frequencies, method = "exact", safety = DEFAULT_SAFETY, dt = None))]
#[allow(clippy::too_many_arguments)]
fn dsum_kernel(
    grid: &PyGrid,
    coefficients: &PyCoefficients,
    psi: Vec<Vec<f64>>,
    period: f64,
    periods: u32,
    frequencies: &PyFrequencies,
    method: &str,
    safety: f64,
    dt: Option<f64>,
) -> PyResult<PyJointKernel> {
    let f = coefficients.0.sample(&grid.0).map_err(py_err)?;
    let spec = DiscreteSumSpec::new(matrix(psi)?, period, periods).map_err(py_err)?;
    abelian_ext::dsum_kernel(&grid.0, &f, &spec, &frequencies.0, self::method(method, safety, dt)?)
        .map(PyJointKernel)
        .map_err(py_err)
}

/// Characteristic function of the Euler chain from `x0` by full path
/// enumeration, one value per terminal site.
#[pyfunction]
fn path_characteristic(
    grid: &PyGrid,
    coefficients: &PyCoefficients,
    dt: f64,
    steps: u32,
    x0: f64,
    z: Complex64,
) -> PyResult<Vec<Complex64>> {
    let f = coefficients.0.sample(&grid.0).map_err(py_err)?;
    oracles::enumerate_euler_paths(&grid.0, &f, dt, steps, x0)
        .map(|e| e.characteristic(z))
        .map_err(py_err)
}

/// Refinement study: `(levels, steps, gaps, fitted_rate)`.
#[pyfunction]
#[pyo3(signature = (coefficients, half_width, levels, t, radius, method = "exact", safety = DEFAULT_SAFETY))]
fn convergence_study(
    coefficients: &PyCoefficients,
    half_width: f64,
    levels: Vec<u32>,
    t: f64,
    radius: f64,
    method: &str,
    safety: f64,
) -> PyResult<Study> {
    let m = match method {
        "exact" => StudyMethod::Exact,
        "euler" => StudyMethod::Euler { safety },
        other => return Err(PyValueError::new_err(format!("unknown method `{other}`"))),
    };
    let r = analysis::kernel_convergence_study(&coefficients.0, half_width, &levels, t, radius, m).map_err(py_err)?;
    Ok((r.levels, r.steps, r.gaps, r.fitted_rate))
}

/// Euler-versus-exact gap per level: `(levels, steps, gaps, fitted_order)`.
#[pyfunction]
#[pyo3(signature = (coefficients, half_width, levels, t, radius, safety = DEFAULT_SAFETY))]
fn euler_gap_study(
    coefficients: &PyCoefficients,
    half_width: f64,
    levels: Vec<u32>,
    t: f64,
    radius: f64,
    safety: f64,
) -> PyResult<Study> {
    let r = analysis::euler_gap_study(&coefficients.0, half_width, &levels, t, radius, safety).map_err(py_err)?;
    Ok((r.levels, r.steps, r.gaps, r.fitted_rate))
}

#[pyfunction]
#[pyo3(signature = (sigma2, t, x, x_prime, half_width, images = 8))]
fn periodic_heat_kernel(sigma2: f64, t: f64, x: f64, x_prime: f64, half_width: f64, images: u32) -> PyResult<f64> {
    oracles::periodic_heat_kernel(sigma2, t, x, x_prime, half_width, images).map_err(py_err)
}

/// `P(W_t <= x, max_{s<=t} W_s <= y)` for standard Brownian motion from 0.
#[pyfunction]
fn bm_sup_cdf(t: f64, x: f64, y: f64) -> f64 {
    oracles::bm_sup_cdf(t, x, y)
}

#[pymodule]
pub fn abelkern(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_class::<PyGrid>()?;
    m.add_class::<PyCoefficients>()?;
    m.add_class::<PyFrequencies>()?;
    m.add_class::<PyJointKernel>()?;
    m.add_function(wrap_pyfunction!(generator_slice, m)?)?;
    m.add_function(wrap_pyfunction!(joint_kernel, m)?)?;
    m.add_function(wrap_pyfunction!(sup_kernel, m)?)?;
    m.add_function(wrap_pyfunction!(sup_reflection_l1, m)?)?;
    m.add_function(wrap_pyfunction!(dsum_power, m)?)?;
    m.add_function(wrap_pyfunction!(dsum_kernel, m)?)?;
    m.add_function(wrap_pyfunction!(path_characteristic, m)?)?;
    m.add_function(wrap_pyfunction!(convergence_study, m)?)?;
    m.add_function(wrap_pyfunction!(euler_gap_study, m)?)?;
    m.add_function(wrap_pyfunction!(periodic_heat_kernel, m)?)?;
    m.add_function(wrap_pyfunction!(bm_sup_cdf, m)?)?;
    Ok(())
}
