//! Periodic spatial lattices, frequency grids and the nearest-neighbour
//! difference operators that every generator is assembled from.
//!
//! A [`SpatialGrid`] at level `m` has `2^(m+1)` points `-L, -L + h, ..., L - h`
//! with `h = L 2^-m`. The endpoints `-L` and `L` are identified, so all index
//! arithmetic wraps modulo the point count.

use ndarray::Array2;
use num_complex::Complex64;
use serde::Serialize;
use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Largest supported refinement level. `2^(MAX_LEVEL+1)` points is already far
/// beyond what dense matrices can hold.
pub const MAX_LEVEL: u32 = 40;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpatialGrid {
    level: u32,
    half_width: f64,
    step: f64,
    points: Vec<f64>,
}

impl SpatialGrid {
    pub fn new(level: u32, half_width: f64) -> Result<Self> {
        if !(half_width.is_finite() && half_width > 0.0) {
            return Err(Error::invalid(
                "half_width",
                format!("must be positive and finite, got {half_width}"),
            ));
        }
        let len = 1usize
            .checked_shl(level + 1)
            .filter(|_| level <= MAX_LEVEL)
            .ok_or_else(|| Error::Sizing {
                level,
                reason: format!("2^{} points overflow (max level {MAX_LEVEL})", level + 1),
            })?;
        let step = half_width / (1u64 << level) as f64;
        let points = (0..len).map(|k| -half_width + k as f64 * step).collect();
        Ok(Self {
            level,
            half_width,
            step,
            points,
        })
    }

    pub fn level(&self) -> u32 {
        self.level
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn point(&self, index: usize) -> f64 {
        self.points[index]
    }

    /// Index arithmetic modulo the point count.
    pub fn wrap(&self, index: isize) -> usize {
        index.rem_euclid(self.len() as isize) as usize
    }

    pub fn next(&self, index: usize) -> usize {
        self.wrap(index as isize + 1)
    }

    pub fn prev(&self, index: usize) -> usize {
        self.wrap(index as isize - 1)
    }

    /// Grid index of coordinate `x` (after reduction modulo `2L`), if `x`
    /// lies on the lattice within `1e-9 h`.
    pub fn index_of(&self, x: f64) -> Option<usize> {
        let offset = (x + self.half_width).rem_euclid(2.0 * self.half_width) / self.step;
        let k = offset.round();
        if (offset - k).abs() > 1e-9 {
            return None;
        }
        Some(self.wrap(k as isize))
    }

    /// Index of the grid point closest to `x`.
    pub fn nearest_index(&self, x: f64) -> usize {
        let offset = (x + self.half_width).rem_euclid(2.0 * self.half_width) / self.step;
        self.wrap(offset.round() as isize)
    }

    /// The grid one level coarser, if any. Its points are the even-index
    /// points of `self`.
    pub fn coarser(&self) -> Option<SpatialGrid> {
        if self.level == 0 {
            return None;
        }
        SpatialGrid::new(self.level - 1, self.half_width).ok()
    }

    pub fn finer(&self) -> Result<SpatialGrid> {
        SpatialGrid::new(self.level + 1, self.half_width)
    }

    pub(crate) fn check_len(&self, len: usize, what: &str) -> Result<()> {
        if len != self.len() {
            return Err(Error::DimensionMismatch(format!(
                "{what} has {len} entries, grid has {}",
                self.len()
            )));
        }
        Ok(())
    }
}

/// Values of a function `X_m -> C` indexed by grid position.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    grid: SpatialGrid,
    values: Vec<Complex64>,
}

impl GridFunction {
    pub fn new(grid: &SpatialGrid, values: Vec<Complex64>) -> Result<Self> {
        grid.check_len(values.len(), "grid function")?;
        Ok(Self {
            grid: grid.clone(),
            values,
        })
    }

    pub fn from_real(grid: &SpatialGrid, values: &[f64]) -> Result<Self> {
        Self::new(grid, values.iter().map(|&v| Complex64::new(v, 0.0)).collect())
    }

    pub fn from_fn(grid: &SpatialGrid, f: impl Fn(f64) -> Complex64) -> Self {
        Self {
            grid: grid.clone(),
            values: grid.points().iter().map(|&x| f(x)).collect(),
        }
    }

    pub fn constant(grid: &SpatialGrid, c: Complex64) -> Self {
        Self::from_fn(grid, |_| c)
    }

    /// Unit value at `index`, zero elsewhere.
    pub fn indicator(grid: &SpatialGrid, index: usize) -> Self {
        let mut values = vec![Complex64::new(0.0, 0.0); grid.len()];
        values[index] = Complex64::new(1.0, 0.0);
        Self {
            grid: grid.clone(),
            values,
        }
    }

    pub fn grid(&self) -> &SpatialGrid {
        &self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }

    fn map_stencil(&self, f: impl Fn(Complex64, Complex64, Complex64) -> Complex64) -> Self {
        let g = &self.grid;
        let values = (0..g.len())
            .map(|k| f(self.values[g.prev(k)], self.values[k], self.values[g.next(k)]))
            .collect();
        Self {
            grid: g.clone(),
            values,
        }
    }
}

/// `(f(x+h) - f(x-h)) / 2h`, periodic.
pub fn central_difference(f: &GridFunction) -> GridFunction {
    let inv = 1.0 / (2.0 * f.grid.step());
    f.map_stencil(|down, _, up| (up - down) * inv)
}

/// `(f(x+h) + f(x-h) - 2 f(x)) / h^2`, periodic.
pub fn second_difference(f: &GridFunction) -> GridFunction {
    let h = f.grid.step();
    let inv = 1.0 / (h * h);
    f.map_stencil(|down, mid, up| (up + down - mid * 2.0) * inv)
}

/// `(f(x+h) - f(x)) / h`, periodic.
pub fn forward_difference(f: &GridFunction) -> GridFunction {
    let inv = 1.0 / f.grid.step();
    f.map_stencil(|_, mid, up| (up - mid) * inv)
}

/// `(f(x) - f(x-h)) / h`, periodic.
pub fn backward_difference(f: &GridFunction) -> GridFunction {
    let inv = 1.0 / f.grid.step();
    f.map_stencil(|down, mid, _| (mid - down) * inv)
}

/// Builds the matrix of a three-point periodic stencil with weights
/// `(down, centre, up)` applied to `(f(x-h), f(x), f(x+h))`.
///
/// Entries accumulate, so on the two-point grid (where `x+h` and `x-h`
/// coincide) both neighbour weights land on the same column.
pub(crate) fn stencil_matrix(grid: &SpatialGrid, down: f64, centre: f64, up: f64) -> Array2<f64> {
    let n = grid.len();
    let mut m = Array2::zeros((n, n));
    for k in 0..n {
        m[[k, grid.prev(k)]] += down;
        m[[k, k]] += centre;
        m[[k, grid.next(k)]] += up;
    }
    m
}

pub fn central_difference_matrix(grid: &SpatialGrid) -> Array2<f64> {
    let w = 1.0 / (2.0 * grid.step());
    stencil_matrix(grid, -w, 0.0, w)
}

pub fn second_difference_matrix(grid: &SpatialGrid) -> Array2<f64> {
    let w = 1.0 / (grid.step() * grid.step());
    stencil_matrix(grid, w, -2.0 * w, w)
}

pub fn forward_difference_matrix(grid: &SpatialGrid) -> Array2<f64> {
    let w = 1.0 / grid.step();
    stencil_matrix(grid, 0.0, -w, w)
}

pub fn backward_difference_matrix(grid: &SpatialGrid) -> Array2<f64> {
    let w = 1.0 / grid.step();
    stencil_matrix(grid, -w, w, 0.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FrequencyLayout {
    /// Half-open inverse lattice `j * pi / L_y`, `j = -2^n .. 2^n - 1`.
    InverseLattice,
    /// Closed symmetric window with both endpoints.
    Window,
    /// Arbitrary user-supplied list.
    Explicit,
}

/// A finite, sorted, duplicate-free set of (possibly complex) frequencies.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FrequencyGrid {
    frequencies: Vec<Complex64>,
    step: Option<f64>,
    layout: FrequencyLayout,
}

impl FrequencyGrid {
    /// Inverse lattice of `Y_n = h_yn Z ∩ [-L_y, L_y)` with `h_yn = L_y 2^-n`:
    /// step `pi / L_y`, frequencies in `[-pi / h_yn, pi / h_yn)`.
    pub fn inverse_lattice(level: u32, half_width: f64) -> Result<Self> {
        if !(half_width.is_finite() && half_width > 0.0) {
            return Err(Error::invalid(
                "half_width",
                format!("must be positive and finite, got {half_width}"),
            ));
        }
        if level > 24 {
            return Err(Error::Sizing {
                level,
                reason: "frequency lattice above 2^25 points".into(),
            });
        }
        let step = PI / half_width;
        let half = 1i64 << level;
        let frequencies = (-half..half).map(|j| Complex64::new(j as f64 * step, 0.0)).collect();
        Ok(Self {
            frequencies,
            step: Some(step),
            layout: FrequencyLayout::InverseLattice,
        })
    }

    /// `count` equally spaced real frequencies on the closed window
    /// `[-half_width, half_width]`.
    pub fn window(half_width: f64, count: usize) -> Result<Self> {
        if !(half_width.is_finite() && half_width > 0.0) {
            return Err(Error::invalid("half_width", "must be positive and finite"));
        }
        if count < 2 {
            return Err(Error::invalid("count", "a window needs at least 2 frequencies"));
        }
        let step = 2.0 * half_width / (count - 1) as f64;
        let frequencies = (0..count)
            .map(|j| {
                // Snap the middle so that an odd count contains 0 exactly.
                let p = -half_width + j as f64 * step;
                if 2 * j + 1 == count {
                    Complex64::new(0.0, 0.0)
                } else {
                    Complex64::new(p, 0.0)
                }
            })
            .collect();
        Ok(Self {
            frequencies,
            step: Some(step),
            layout: FrequencyLayout::Window,
        })
    }

    /// Explicit list; sorted by (re, im) with exact duplicates removed.
    pub fn explicit(mut frequencies: Vec<Complex64>) -> Result<Self> {
        if frequencies.is_empty() {
            return Err(Error::Empty("frequency list"));
        }
        if frequencies.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
            return Err(Error::invalid("frequencies", "non-finite frequency"));
        }
        frequencies.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
        frequencies.dedup();
        Ok(Self {
            frequencies,
            step: None,
            layout: FrequencyLayout::Explicit,
        })
    }

    pub fn from_real(values: &[f64]) -> Result<Self> {
        Self::explicit(values.iter().map(|&p| Complex64::new(p, 0.0)).collect())
    }

    pub fn frequencies(&self) -> &[Complex64] {
        &self.frequencies
    }

    pub fn len(&self) -> usize {
        self.frequencies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frequencies.is_empty()
    }

    pub fn layout(&self) -> FrequencyLayout {
        self.layout
    }

    pub fn step(&self) -> Option<f64> {
        self.step
    }

    /// Largest modulus in the set (the disc radius it fits in).
    pub fn radius(&self) -> f64 {
        self.frequencies.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn position(&self, z: Complex64, tol: f64) -> Option<usize> {
        self.frequencies.iter().position(|w| (w - z).norm() <= tol)
    }

    /// Uniform spacing of a real frequency set, or an error describing why it
    /// is not uniform.
    pub fn uniform_step(&self) -> Result<f64> {
        if self.frequencies.iter().any(|z| z.im != 0.0) {
            return Err(Error::NonUniformFrequencies("complex frequencies present".into()));
        }
        if self.len() < 2 {
            return Err(Error::NonUniformFrequencies("fewer than two frequencies".into()));
        }
        if let Some(step) = self.step {
            return Ok(step);
        }
        let step = self.frequencies[1].re - self.frequencies[0].re;
        for w in self.frequencies.windows(2) {
            let d = w[1].re - w[0].re;
            if (d - step).abs() > 1e-9 * step.abs().max(1.0) {
                return Err(Error::NonUniformFrequencies(format!("spacing {d} differs from {step}")));
            }
        }
        Ok(step)
    }

    /// Quadrature weights for integrating over the frequency set: equal
    /// weights on the periodic inverse lattice, trapezoid otherwise.
    pub fn quadrature_weights(&self) -> Result<Vec<f64>> {
        let step = self.uniform_step()?;
        let mut w = vec![step; self.len()];
        if self.layout != FrequencyLayout::InverseLattice {
            let last = w.len() - 1;
            w[0] *= 0.5;
            w[last] *= 0.5;
        }
        Ok(w)
    }
}

/// Frequency grid on the inverse lattice of level `level` and half-width
/// `half_width`.
pub fn build_frequency_grid(level: u32, half_width: f64) -> Result<FrequencyGrid> {
    FrequencyGrid::inverse_lattice(level, half_width)
}

pub fn build_spatial_grid(level: u32, half_width: f64) -> Result<SpatialGrid> {
    SpatialGrid::new(level, half_width)
}
