//! Time evolution of Fourier slices, either exactly (`exp(t L(z))`) or with
//! the fully explicit Euler scheme `(1 + dt L(z))^N`, and inversion of the
//! resulting kernel family back to a joint density in the integral variable.

use ndarray::Array3;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;
use std::f64::consts::PI;

use crate::coefficients::CoefficientField;
use crate::error::{Error, Result};
use crate::generators::{diffusion_generator, fourier_slice, FourierSlice};
use crate::lattice::{FrequencyGrid, FrequencyLayout, SpatialGrid};
use crate::linalg::{expm, identity, max_abs_diff, CMatrix};

pub use crate::linalg::matrix_power;

/// Euler safety factor applied to the Courant bound unless the caller asks
/// otherwise.
pub const DEFAULT_SAFETY: f64 = 0.9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", content = "dt", rename_all = "snake_case")]
pub enum CourantBound {
    Bounded(f64),
    /// Every diagonal entry has non-negative real part.
    Unconstrained,
}

impl CourantBound {
    pub fn value(self) -> Option<f64> {
        match self {
            CourantBound::Bounded(dt) => Some(dt),
            CourantBound::Unconstrained => None,
        }
    }
}

/// `safety * min_d sup{s > 0 : 1 + s Re(d) > 0}` over all diagonal entries
/// `d` of all slices; entries with `Re(d) >= 0` impose no bound.
pub fn courant_max_step(slices: &[FourierSlice], safety: f64) -> Result<CourantBound> {
    if slices.is_empty() {
        return Err(Error::Empty("slice list"));
    }
    check_safety(safety)?;
    let bound = slices
        .iter()
        .flat_map(|s| s.entries().diag().to_vec())
        .filter(|d| d.re < 0.0)
        .map(|d| -1.0 / d.re)
        .fold(f64::INFINITY, f64::min);
    Ok(if bound.is_finite() {
        CourantBound::Bounded(safety * bound)
    } else {
        CourantBound::Unconstrained
    })
}

fn check_safety(safety: f64) -> Result<()> {
    if !(safety > 0.0 && safety <= 1.0) {
        return Err(Error::invalid("safety", format!("must lie in (0, 1], got {safety}")));
    }
    Ok(())
}

fn check_courant(slice: &FourierSlice, dt: f64) -> Result<()> {
    if !(dt >= 0.0 && dt.is_finite()) {
        return Err(Error::invalid(
            "dt",
            format!("must be finite and non-negative, got {dt}"),
        ));
    }
    for (k, d) in slice.entries().diag().iter().enumerate() {
        let value = 1.0 + dt * d.re;
        if value <= 0.0 {
            return Err(Error::Courant {
                site: slice.grid().point(k),
                z: slice.z(),
                diag: *d,
                dt,
                value,
                bound: courant_max_step(std::slice::from_ref(slice), 1.0)?
                    .value()
                    .unwrap_or(f64::INFINITY),
            });
        }
    }
    Ok(())
}

/// Time step and step count of an explicit Euler run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EulerScheme {
    dt: f64,
    steps: u64,
    safety: f64,
}

impl EulerScheme {
    /// `N = floor(t / dt)` steps of size `dt`.
    pub fn new(t: f64, dt: f64, safety: f64) -> Result<Self> {
        check_safety(safety)?;
        if !(t >= 0.0 && t.is_finite()) {
            return Err(Error::invalid("t", format!("must be finite and non-negative, got {t}")));
        }
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::invalid("dt", format!("must be positive, got {dt}")));
        }
        // guard against t/dt landing a hair below an integer
        let ratio = t / dt;
        let steps = if (ratio - ratio.round()).abs() <= 1e-9 * ratio.max(1.0) {
            ratio.round()
        } else {
            ratio.floor()
        };
        Ok(Self {
            dt,
            steps: steps as u64,
            safety,
        })
    }

    /// Step at `safety` times the Courant bound of `slices`. Unconstrained
    /// families fall back to a single step over `[0, t]`.
    pub fn at_courant(slices: &[FourierSlice], t: f64, safety: f64) -> Result<Self> {
        let dt = match courant_max_step(slices, safety)? {
            CourantBound::Bounded(dt) => dt,
            CourantBound::Unconstrained => t.max(f64::MIN_POSITIVE),
        };
        Self::new(t, dt, safety)
    }

    /// Like [`EulerScheme::at_courant`] but shrinks `dt` to `t / ceil(t / dt)`
    /// so that the steps land exactly on `t`.
    pub fn aligned_at_courant(slices: &[FourierSlice], t: f64, safety: f64) -> Result<Self> {
        let at = Self::at_courant(slices, t, safety)?;
        if t == 0.0 {
            return Ok(at);
        }
        let steps = (t / at.dt).ceil().max(1.0);
        Ok(Self {
            dt: t / steps,
            steps: steps as u64,
            safety,
        })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn safety(&self) -> f64 {
        self.safety
    }
}

/// `I + dt L(z)`, rejecting steps that violate the Courant condition.
pub fn euler_transfer(slice: &FourierSlice, dt: f64) -> Result<CMatrix> {
    check_courant(slice, dt)?;
    let n = slice.grid().len();
    Ok(identity(n) + slice.entries() * Complex64::new(dt, 0.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum KernelMethod {
    Exact,
    Euler { dt: f64, steps: u64 },
}

/// Propagated kernel `u(x, x'; z, t)` including the `1/h` density factor.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelSlice {
    grid: SpatialGrid,
    z: Complex64,
    t: f64,
    entries: CMatrix,
    method: KernelMethod,
}

impl KernelSlice {
    pub(crate) fn from_parts(grid: SpatialGrid, z: Complex64, t: f64, entries: CMatrix, method: KernelMethod) -> Self {
        Self {
            grid,
            z,
            t,
            entries,
            method,
        }
    }

    pub fn grid(&self) -> &SpatialGrid {
        &self.grid
    }

    pub fn z(&self) -> Complex64 {
        self.z
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn entries(&self) -> &CMatrix {
        &self.entries
    }

    pub fn into_entries(self) -> CMatrix {
        self.entries
    }

    pub fn method(&self) -> KernelMethod {
        self.method
    }

    /// `h * entries`, the transition matrix of the slice.
    pub fn transition(&self) -> CMatrix {
        &self.entries * Complex64::new(self.grid.step(), 0.0)
    }

    /// Largest `|row sum - 1|` and most negative real entry of
    /// `h * entries`, i.e. how far the slice is from a stochastic matrix.
    pub fn stochastic_defect(&self) -> (f64, f64) {
        let p = self.transition();
        let rows = p.rows().into_iter().map(|r| (r.sum() - 1.0).norm()).fold(0.0, f64::max);
        let min = p.iter().map(|v| v.re).fold(f64::INFINITY, f64::min);
        (rows, min)
    }
}

fn check_time(t: f64) -> Result<()> {
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::invalid("t", format!("must be finite and non-negative, got {t}")));
    }
    Ok(())
}

/// `(1/h) exp(t L(z))`.
pub fn exact_kernel(slice: &FourierSlice, t: f64) -> Result<KernelSlice> {
    check_time(t)?;
    let h = slice.grid().step();
    let propagator = expm(&(slice.entries() * Complex64::new(t, 0.0)));
    Ok(KernelSlice {
        grid: slice.grid().clone(),
        z: slice.z(),
        t,
        entries: propagator / Complex64::new(h, 0.0),
        method: KernelMethod::Exact,
    })
}

/// `(1/h) (I + dt L(z))^N`.
pub fn euler_kernel(slice: &FourierSlice, t: f64, scheme: &EulerScheme) -> Result<KernelSlice> {
    check_time(t)?;
    let transfer = euler_transfer(slice, scheme.dt())?;
    let h = slice.grid().step();
    Ok(KernelSlice {
        grid: slice.grid().clone(),
        z: slice.z(),
        t,
        entries: matrix_power(&transfer, scheme.steps()) / Complex64::new(h, 0.0),
        method: KernelMethod::Euler {
            dt: scheme.dt(),
            steps: scheme.steps(),
        },
    })
}

/// How to propagate a family of slices.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Method {
    Exact,
    /// Explicit Euler; `dt = None` picks `safety` times the Courant bound of
    /// the whole requested family.
    Euler {
        dt: Option<f64>,
        safety: f64,
    },
}

impl Method {
    pub fn euler_auto() -> Self {
        Method::Euler {
            dt: None,
            safety: DEFAULT_SAFETY,
        }
    }

    /// Resolves the Euler scheme for a family of slices.
    pub fn scheme(&self, slices: &[FourierSlice], t: f64) -> Result<Option<EulerScheme>> {
        match *self {
            Method::Exact => Ok(None),
            Method::Euler { dt: Some(dt), safety } => Ok(Some(EulerScheme::new(t, dt, safety)?)),
            Method::Euler { dt: None, safety } => Ok(Some(EulerScheme::at_courant(slices, t, safety)?)),
        }
    }
}

pub(crate) fn propagate(slice: &FourierSlice, t: f64, scheme: Option<&EulerScheme>) -> Result<KernelSlice> {
    match scheme {
        None => exact_kernel(slice, t),
        Some(s) => euler_kernel(slice, t, s),
    }
}

/// One propagated slice per frequency.
#[derive(Debug, Clone, PartialEq)]
pub struct JointKernelFT {
    grid: SpatialGrid,
    frequencies: FrequencyGrid,
    t: f64,
    slices: Vec<KernelSlice>,
    scheme: Option<EulerScheme>,
    coefficients: CoefficientField,
}

impl JointKernelFT {
    pub(crate) fn from_parts(
        grid: SpatialGrid,
        frequencies: FrequencyGrid,
        t: f64,
        slices: Vec<KernelSlice>,
        scheme: Option<EulerScheme>,
        coefficients: CoefficientField,
    ) -> Self {
        Self {
            grid,
            frequencies,
            t,
            slices,
            scheme,
            coefficients,
        }
    }

    pub fn grid(&self) -> &SpatialGrid {
        &self.grid
    }

    pub fn frequencies(&self) -> &FrequencyGrid {
        &self.frequencies
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn slices(&self) -> &[KernelSlice] {
        &self.slices
    }

    pub fn scheme(&self) -> Option<&EulerScheme> {
        self.scheme.as_ref()
    }

    pub fn coefficients(&self) -> &CoefficientField {
        &self.coefficients
    }

    pub fn slice_at(&self, z: Complex64) -> Option<&KernelSlice> {
        self.frequencies.position(z, 1e-12).map(|k| &self.slices[k])
    }

    /// Largest `|u(-conj z) - conj u(z)|` over frequency pairs present in the
    /// grid. Zero for real coefficient fields up to rounding.
    pub fn hermitian_defect(&self) -> f64 {
        let zs = self.frequencies.frequencies();
        let mut worst = 0.0f64;
        for (k, z) in zs.iter().enumerate() {
            if let Some(j) = self.frequencies.position(-z.conj(), 1e-12) {
                if j < k {
                    continue;
                }
                let conj = self.slices[k].entries.mapv(|v| v.conj());
                worst = worst.max(max_abs_diff(&conj, &self.slices[j].entries));
            }
        }
        worst
    }
}

/// Relative tolerance on the Hermitian check run by [`joint_kernel`].
const HERMITIAN_TOL: f64 = 1e-9;

/// Builds and propagates a slice for every frequency of `freqs`.
pub fn joint_kernel(
    grid: &SpatialGrid,
    coeffs: &CoefficientField,
    t: f64,
    freqs: &FrequencyGrid,
    method: Method,
) -> Result<JointKernelFT> {
    check_time(t)?;
    let slices: Vec<FourierSlice> = freqs
        .frequencies()
        .par_iter()
        .map(|&z| fourier_slice(grid, coeffs, z))
        .collect::<Result<_>>()?;
    let scheme = method.scheme(&slices, t)?;
    let kernels: Vec<KernelSlice> = slices
        .par_iter()
        .map(|s| propagate(s, t, scheme.as_ref()))
        .collect::<Result<_>>()?;
    let ft = JointKernelFT::from_parts(grid.clone(), freqs.clone(), t, kernels, scheme, coeffs.clone());
    let scale = ft
        .slices
        .iter()
        .map(|s| crate::linalg::max_abs(&s.entries))
        .fold(1.0, f64::max);
    let defect = ft.hermitian_defect();
    if defect > HERMITIAN_TOL * scale {
        return Err(Error::DimensionMismatch(format!(
            "Hermitian symmetry across frequencies violated by {defect}"
        )));
    }
    Ok(ft)
}

/// Kernel of the bare diffusion generator, by the same method as a family.
pub fn diffusion_kernel(
    grid: &SpatialGrid,
    coeffs: &CoefficientField,
    t: f64,
    scheme: Option<&EulerScheme>,
) -> Result<KernelSlice> {
    let gen = diffusion_generator(grid, coeffs)?;
    let slice = fourier_slice(grid, coeffs, Complex64::new(0.0, 0.0))?;
    debug_assert_eq!(slice.entries(), &gen.to_complex());
    propagate(&slice, t, scheme)
}

/// Joint density in `(x, x', dy)` reconstructed from a kernel family.
#[derive(Debug, Clone, PartialEq)]
pub struct JointDensity {
    grid: SpatialGrid,
    offsets: Vec<f64>,
    offset_weights: Vec<f64>,
    t: f64,
    values: Array3<f64>,
    frequency_window: (f64, f64),
    frequency_weights: Vec<f64>,
    max_imaginary_residual: f64,
}

impl JointDensity {
    pub fn grid(&self) -> &SpatialGrid {
        &self.grid
    }

    pub fn offsets(&self) -> &[f64] {
        &self.offsets
    }

    /// Cell widths used when summing over offsets.
    pub fn offset_weights(&self) -> &[f64] {
        &self.offset_weights
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    /// `values[[x, x', k]]` is the density at offset `offsets[k]`.
    pub fn values(&self) -> &Array3<f64> {
        &self.values
    }

    pub fn frequency_window(&self) -> (f64, f64) {
        self.frequency_window
    }

    pub fn frequency_weights(&self) -> &[f64] {
        &self.frequency_weights
    }

    pub fn max_imaginary_residual(&self) -> f64 {
        self.max_imaginary_residual
    }

    /// `sum_k w_k u(x, x', y_k)` for every pair, to compare with the zero
    /// frequency slice.
    pub fn summed_over_offsets(&self) -> ndarray::Array2<f64> {
        let (n, m, _) = self.values.dim();
        ndarray::Array2::from_shape_fn((n, m), |(a, b)| {
            self.offset_weights
                .iter()
                .enumerate()
                .map(|(k, w)| w * self.values[[a, b, k]])
                .sum()
        })
    }
}

/// Cell widths of a sorted offset list (half the distance to each neighbour,
/// the full gap at the ends); equal to the spacing for uniform offsets.
fn offset_cells(offsets: &[f64]) -> Vec<f64> {
    let n = offsets.len();
    if n == 1 {
        return vec![1.0];
    }
    (0..n)
        .map(|k| match k {
            0 => offsets[1] - offsets[0],
            k if k == n - 1 => offsets[n - 1] - offsets[n - 2],
            k => 0.5 * (offsets[k + 1] - offsets[k - 1]),
        })
        .collect()
}

/// `u(x, x'; y) = int e^{+i p y} u(x, x'; p) dp / 2pi` by the trapezoid rule
/// over the uniform real frequency grid of `ft`. With the slice convention
/// `u(p) = E[e^{-i p y}; ...]` this inverts the partial Fourier transform.
pub fn reconstruct_joint_density(ft: &JointKernelFT, y_offsets: &[f64]) -> Result<JointDensity> {
    if y_offsets.is_empty() {
        return Err(Error::Empty("offset list"));
    }
    if y_offsets.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::invalid("y_offsets", "must be strictly increasing"));
    }
    let weights = ft.frequencies.quadrature_weights()?;
    let ps: Vec<f64> = ft.frequencies.frequencies().iter().map(|z| z.re).collect();
    let n = ft.grid.len();
    let i = Complex64::i();
    let mut values = Array3::zeros((n, n, y_offsets.len()));
    // the lowest inverse-lattice frequency has no mirror; split it evenly
    // between -p and +p, which keeps only its real part
    let unpaired = ft.frequencies.layout() == FrequencyLayout::InverseLattice;
    let mut residual = 0.0f64;
    for (k, &y) in y_offsets.iter().enumerate() {
        let phases: Vec<Complex64> = ps
            .iter()
            .zip(&weights)
            .map(|(&p, &w)| (i * p * y).exp() * (w / (2.0 * PI)))
            .collect();
        for a in 0..n {
            for b in 0..n {
                let mut terms = ft.slices.iter().zip(&phases).map(|(s, ph)| s.entries[[a, b]] * ph);
                let v: Complex64 = if unpaired {
                    let nyquist = terms.next().map(|t| t.re).unwrap_or(0.0);
                    terms.sum::<Complex64>() + nyquist
                } else {
                    terms.sum()
                };
                values[[a, b, k]] = v.re;
                residual = residual.max(v.im.abs());
            }
        }
    }
    Ok(JointDensity {
        grid: ft.grid.clone(),
        offsets: y_offsets.to_vec(),
        offset_weights: offset_cells(y_offsets),
        t: ft.t,
        values,
        frequency_window: (ps[0], ps[ps.len() - 1]),
        frequency_weights: weights,
        max_imaginary_residual: residual,
    })
}

/// Offsets dual to a uniform `count`-point frequency grid with spacing
/// `step`: `y_k = k * 2 pi / (count * step)` for `k` in `[-count/2, count/2)`.
pub fn dual_offsets(freqs: &FrequencyGrid) -> Result<Vec<f64>> {
    let step = freqs.uniform_step()?;
    let count = freqs.len() as i64;
    let dy = 2.0 * PI / (count as f64 * step);
    Ok((-count / 2..count - count / 2).map(|k| k as f64 * dy).collect())
}
