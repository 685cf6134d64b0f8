//! Running supremum and discrete-time sums.
//!
//! The sup process is block-diagonalized in real space: with
//! `V[(x, a), (x, b)] = 1(a <= b)`, `V^{-1} L~ V` has one block per level `y`,
//! `L_y(x, x') = L(x, x') 1(x' <= y)`, and `exp(t L_y)(x0, x')` is the
//! probability of ending at `x'` without rising above `y`. Block rows are
//! evaluated by uniformization, which needs only products with the sparse
//! generator and has no cancellation for these substochastic blocks.

use ndarray::Array2;
use num_complex::Complex64;
use rayon::prelude::*;
use std::collections::BTreeSet;
use std::io::Write;

use crate::coefficients::CoefficientField;
use crate::error::{Error, Result};
use crate::generators::{diffusion_generator, fourier_slice};
use crate::lattice::{FrequencyGrid, SpatialGrid};
use crate::linalg::{expm, matrix_power, to_complex, CMatrix};
use crate::oracles::bm_sup_cell_mass;
use crate::propagation::{euler_transfer, JointKernelFT, KernelMethod, KernelSlice, Method};

/// Largest grid on which the lifted sup generator is assembled.
pub const LIFTED_GRID_LIMIT: usize = 32;

/// Uniformization runs in chunks with `rate * dt` at most this.
const CHUNK_RATE: f64 = 30.0;

#[derive(Debug, Clone, PartialEq)]
pub struct SupBlocks {
    grid: SpatialGrid,
    generator: Array2<f64>,
    /// Non-zero entries of each generator row, in column order.
    sparse: Vec<Vec<(usize, f64)>>,
}

/// Absorbed generators of every level of `grid`.
pub fn sup_blocks(grid: &SpatialGrid, coeffs: &CoefficientField) -> Result<SupBlocks> {
    let generator = diffusion_generator(grid, coeffs)?.entries().clone();
    let sparse = generator
        .rows()
        .into_iter()
        .map(|row| {
            row.iter()
                .enumerate()
                .filter(|(_, v)| **v != 0.0)
                .map(|(k, v)| (k, *v))
                .collect()
        })
        .collect();
    Ok(SupBlocks {
        grid: grid.clone(),
        generator,
        sparse,
    })
}

impl SupBlocks {
    pub fn grid(&self) -> &SpatialGrid {
        &self.grid
    }

    pub fn levels(&self) -> usize {
        self.grid.len()
    }

    pub fn generator(&self) -> &Array2<f64> {
        &self.generator
    }

    /// `L(x, x') 1(x' <= y_level)`.
    pub fn block(&self, level: usize) -> Array2<f64> {
        let n = self.grid.len();
        Array2::from_shape_fn((n, n), |(r, c)| if c <= level { self.generator[[r, c]] } else { 0.0 })
    }

    fn uniformization_rate(&self) -> f64 {
        (0..self.grid.len())
            .map(|k| -self.generator[[k, k]])
            .fold(0.0, f64::max)
    }

    /// `v (I + L_y / rate)`.
    fn step(&self, v: &[f64], level: usize, rate: f64, out: &mut [f64]) {
        out.copy_from_slice(v);
        for (x, &vx) in v.iter().enumerate() {
            if vx == 0.0 {
                continue;
            }
            for &(col, w) in &self.sparse[x] {
                if col <= level {
                    out[col] += vx * w / rate;
                }
            }
        }
    }

    /// Row `start` of `exp(t L_y)`.
    pub fn propagate_row(&self, start: usize, level: usize, t: f64) -> Vec<f64> {
        let n = self.grid.len();
        let mut v = vec![0.0; n];
        v[start] = 1.0;
        let rate = self.uniformization_rate();
        if t == 0.0 || rate == 0.0 {
            return v;
        }
        let chunks = (rate * t / CHUNK_RATE).ceil().max(1.0) as usize;
        let lambda = rate * t / chunks as f64;
        let mut term = vec![0.0; n];
        let mut next = vec![0.0; n];
        for _ in 0..chunks {
            // sum_k Poisson(k; lambda) v P^k
            let mut weight = (-lambda).exp();
            let mut acc: Vec<f64> = v.iter().map(|x| x * weight).collect();
            let mut cumulative = weight;
            term.copy_from_slice(&v);
            let mut k = 0usize;
            while 1.0 - cumulative > 1e-17 && (k as f64) < lambda + 40.0 * lambda.sqrt() + 40.0 {
                k += 1;
                self.step(&term, level, rate, &mut next);
                std::mem::swap(&mut term, &mut next);
                weight *= lambda / k as f64;
                cumulative += weight;
                for (a, b) in acc.iter_mut().zip(&term) {
                    *a += weight * b;
                }
            }
            v = acc;
        }
        v
    }
}

/// Joint law of `(x_t, max_{s<=t} x_s)` from `(x0, x0)`, stored as
/// `values[[x', y']] = (1/h) P(x_t = x', max = y')`.
#[derive(Debug, Clone, PartialEq)]
pub struct SupJointKernel {
    grid: SpatialGrid,
    t: f64,
    start: usize,
    values: Array2<f64>,
}

impl SupJointKernel {
    pub fn grid(&self) -> &SpatialGrid {
        &self.grid
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn start(&self) -> usize {
        self.start
    }

    /// Indexed `[x', y']`.
    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    /// `sum_{y'} values`, the diffusion kernel row at `x0`.
    pub fn marginal(&self) -> Vec<f64> {
        self.values.rows().into_iter().map(|r| r.sum()).collect()
    }

    /// Largest entry modulus outside `y' >= max(x0, x')`.
    pub fn support_violation(&self) -> f64 {
        let n = self.grid.len();
        let mut worst = 0.0f64;
        for xp in 0..n {
            for yp in 0..n {
                if yp < self.start || yp < xp {
                    worst = worst.max(self.values[[xp, yp]].abs());
                }
            }
        }
        worst
    }

    /// L1 distance between the lattice law and the continuum law of
    /// Brownian motion with variance rate `sigma2` and its running maximum.
    /// The lattice mass at `(x', y')` is compared with the continuum mass of
    /// `[x' - h/2, x' + h/2] x [y', y' + h]`: by lattice reflection
    /// `P(x_t = x', max >= y') = P(x_t = 2y' - x')`, so a lattice maximum `y'`
    /// stands for continuum maxima in `[y', y' + h)`. Continuum mass outside
    /// all cells is added.
    pub fn reflection_l1(&self, sigma2: f64) -> f64 {
        let h = self.grid.step();
        let x0 = self.grid.point(self.start);
        let tau = sigma2 * self.t;
        let n = self.grid.len();
        let mut l1 = 0.0;
        let mut covered = 0.0;
        for xp in 0..n {
            let x = self.grid.point(xp) - x0;
            for yp in self.start..n {
                let y = self.grid.point(yp) - x0;
                let cell = bm_sup_cell_mass(tau, (x - h / 2.0, x + h / 2.0), (y, y + h));
                covered += cell;
                l1 += (self.values[[xp, yp]] * h - cell).abs();
            }
        }
        l1 + (1.0 - covered).max(0.0)
    }

    /// Columns `x', y', value`, `x'`-major.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "x',y',value")?;
        for ((xp, yp), v) in self.values.indexed_iter() {
            writeln!(out, "{},{},{}", self.grid.point(xp), self.grid.point(yp), v)?;
        }
        Ok(())
    }
}

/// `u(x0, x0; x', y') = d(y' - x0) u_{x0}(x0, x') + 1(y' > x0) (u_{y'} - u_{y'-h})(x0, x')`
/// with `u_y = exp(t L_y)`.
pub fn sup_joint_kernel(grid: &SpatialGrid, coeffs: &CoefficientField, t: f64, x0: f64) -> Result<SupJointKernel> {
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::invalid("t", format!("must be finite and non-negative, got {t}")));
    }
    let start = grid
        .index_of(x0)
        .ok_or_else(|| Error::invalid("x0", format!("{x0} is not a grid point")))?;
    let blocks = sup_blocks(grid, coeffs)?;
    let n = grid.len();
    let rows: Vec<Vec<f64>> = (start..n)
        .into_par_iter()
        .map(|level| blocks.propagate_row(start, level, t))
        .collect();
    let inv_h = 1.0 / grid.step();
    let mut values = Array2::zeros((n, n));
    for (k, level) in (start..n).enumerate() {
        for xp in 0..n {
            let below = if k == 0 { 0.0 } else { rows[k - 1][xp] };
            values[[xp, level]] = (rows[k][xp] - below) * inv_h;
        }
    }
    Ok(SupJointKernel {
        grid: grid.clone(),
        t,
        start,
        values,
    })
}

fn lifted_guard(grid: &SpatialGrid) -> Result<usize> {
    let n = grid.len();
    if n > LIFTED_GRID_LIMIT {
        return Err(Error::WorkGuard(format!(
            "lifted sup generator needs at most {LIFTED_GRID_LIMIT} grid points, got {n}"
        )));
    }
    Ok(n)
}

/// Lifted index of `(x, y)`.
pub fn lifted_index(n: usize, x: usize, y: usize) -> usize {
    x * n + y
}

/// `L~((x, y), (x', y')) = L(x, x') A`, `A = 1` if `x' < y, y' = y` or
/// `x' >= y, y' = x'`.
pub fn lifted_sup_generator(grid: &SpatialGrid, coeffs: &CoefficientField) -> Result<Array2<f64>> {
    let n = lifted_guard(grid)?;
    let l = diffusion_generator(grid, coeffs)?;
    let l = l.entries();
    let mut out = Array2::zeros((n * n, n * n));
    for x in 0..n {
        for y in 0..n {
            for xp in 0..n {
                let yp = if xp < y { y } else { xp };
                out[[lifted_index(n, x, y), lifted_index(n, xp, yp)]] += l[[x, xp]];
            }
        }
    }
    Ok(out)
}

/// `(V, V^{-1})` on the lifted space: `V[(x, a), (x, b)] = 1(a <= b)`.
pub fn sup_transform(grid: &SpatialGrid) -> Result<(Array2<f64>, Array2<f64>)> {
    let n = lifted_guard(grid)?;
    let mut v = Array2::zeros((n * n, n * n));
    let mut inv = Array2::zeros((n * n, n * n));
    for x in 0..n {
        for a in 0..n {
            for b in a..n {
                v[[lifted_index(n, x, a), lifted_index(n, x, b)]] = 1.0;
            }
            inv[[lifted_index(n, x, a), lifted_index(n, x, a)]] = 1.0;
            if a + 1 < n {
                inv[[lifted_index(n, x, a), lifted_index(n, x, a + 1)]] = -1.0;
            }
        }
    }
    Ok((v, inv))
}

/// Per-transition increment matrices of the sup on `Y`: the update
/// `y -> max(y, x')` for every target `x'`.
pub fn sup_increment_matrices(grid: &SpatialGrid) -> Vec<CMatrix> {
    let n = grid.len();
    (0..n)
        .map(|xp| {
            let mut q = CMatrix::zeros((n, n));
            for y in 0..n {
                q[[y, y.max(xp)]] = Complex64::new(1.0, 0.0);
            }
            q
        })
        .collect()
}

/// Per-step summand `psi(x1, x2)` over `N` periods of length `period`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteSumSpec {
    psi: Array2<f64>,
    period: f64,
    periods: u32,
}

impl DiscreteSumSpec {
    pub fn new(psi: Array2<f64>, period: f64, periods: u32) -> Result<Self> {
        if !psi.is_square() {
            return Err(Error::DimensionMismatch(format!("psi is {:?}", psi.dim())));
        }
        if let Some(((r, c), v)) = psi.indexed_iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::invalid("psi", format!("entry ({r}, {c}) is {v}")));
        }
        if !(period > 0.0 && period.is_finite()) {
            return Err(Error::invalid("period", format!("must be positive, got {period}")));
        }
        if periods == 0 {
            return Err(Error::invalid("periods", "need at least one period"));
        }
        Ok(Self { psi, period, periods })
    }

    /// `psi = 0`.
    pub fn zero(n: usize, period: f64, periods: u32) -> Result<Self> {
        Self::new(Array2::zeros((n, n)), period, periods)
    }

    /// `psi(x1, x2) = g(x2) - g(x1)`.
    pub fn separable(g: &[f64], period: f64, periods: u32) -> Result<Self> {
        let n = g.len();
        Self::new(Array2::from_shape_fn((n, n), |(a, b)| g[b] - g[a]), period, periods)
    }

    /// `psi(x1, x2) = g(x2)`.
    pub fn terminal_only(g: &[f64], period: f64, periods: u32) -> Result<Self> {
        let n = g.len();
        Self::new(Array2::from_shape_fn((n, n), |(_, b)| g[b]), period, periods)
    }

    /// From `(x1, x2, value)` rows given in grid coordinates. Pairs absent
    /// from the table get `psi = 0`.
    pub fn from_table(grid: &SpatialGrid, rows: &[(f64, f64, f64)], period: f64, periods: u32) -> Result<Self> {
        let n = grid.len();
        let mut psi = Array2::zeros((n, n));
        let mut seen = BTreeSet::new();
        for &(x1, x2, v) in rows {
            let locate = |x: f64| {
                grid.index_of(x)
                    .ok_or_else(|| Error::invalid("psi table", format!("{x} is not a grid point")))
            };
            let (a, b) = (locate(x1)?, locate(x2)?);
            if !seen.insert((a, b)) {
                return Err(Error::invalid("psi table", format!("duplicate pair ({x1}, {x2})")));
            }
            psi[[a, b]] = v;
        }
        Self::new(psi, period, periods)
    }

    pub fn psi(&self) -> &Array2<f64> {
        &self.psi
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    pub fn periods(&self) -> u32 {
        self.periods
    }
}

/// `U(x1, x2) e^{-i p psi(x1, x2)}`.
pub fn phased_transition(period: &CMatrix, psi: &Array2<f64>, p: Complex64) -> Result<CMatrix> {
    if period.dim() != psi.dim() || !period.is_square() {
        return Err(Error::DimensionMismatch(format!(
            "transition is {:?}, psi is {:?}",
            period.dim(),
            psi.dim()
        )));
    }
    let minus_ip = -Complex64::i() * p;
    Ok(CMatrix::from_shape_fn(period.dim(), |(a, b)| {
        if psi[[a, b]] == 0.0 {
            period[[a, b]]
        } else {
            period[[a, b]] * (minus_ip * psi[[a, b]]).exp()
        }
    }))
}

/// `(U e^{-ip psi})^N` for an arbitrary one-period transition matrix.
pub fn dsum_power(period: &CMatrix, psi: &Array2<f64>, p: Complex64, periods: u32) -> Result<CMatrix> {
    Ok(matrix_power(&phased_transition(period, psi, p)?, periods as u64))
}

/// One-period transition `exp(dT L)` or `(I + dt L)^k`, without `1/h`.
pub fn period_transition(
    grid: &SpatialGrid,
    coeffs: &CoefficientField,
    period: f64,
    method: Method,
) -> Result<(CMatrix, KernelMethod)> {
    let slice = fourier_slice(grid, coeffs, Complex64::new(0.0, 0.0))?;
    match method.scheme(std::slice::from_ref(&slice), period)? {
        None => Ok((
            expm(&(to_complex(diffusion_generator(grid, coeffs)?.entries()) * Complex64::new(period, 0.0))),
            KernelMethod::Exact,
        )),
        Some(scheme) => {
            if scheme.steps() == 0 {
                return Err(Error::invalid(
                    "dt",
                    format!("{} exceeds the period {period}", scheme.dt()),
                ));
            }
            let transfer = euler_transfer(&slice, scheme.dt())?;
            Ok((
                matrix_power(&transfer, scheme.steps()),
                KernelMethod::Euler {
                    dt: scheme.dt(),
                    steps: scheme.steps(),
                },
            ))
        }
    }
}

/// `U^(p)` over one period, without the `1/h` density factor.
pub fn dsum_slice(
    grid: &SpatialGrid,
    coeffs: &CoefficientField,
    spec: &DiscreteSumSpec,
    p: Complex64,
    method: Method,
) -> Result<CMatrix> {
    grid.check_len(spec.psi.nrows(), "psi")?;
    let (u, _) = period_transition(grid, coeffs, spec.period, method)?;
    phased_transition(&u, &spec.psi, p)
}

/// `(1/h) U^(p)^N` for every frequency, as a kernel family at `t = N dT`.
pub fn dsum_kernel(
    grid: &SpatialGrid,
    coeffs: &CoefficientField,
    spec: &DiscreteSumSpec,
    freqs: &FrequencyGrid,
    method: Method,
) -> Result<JointKernelFT> {
    grid.check_len(spec.psi.nrows(), "psi")?;
    let (u, kind) = period_transition(grid, coeffs, spec.period, method)?;
    let t = spec.period * spec.periods as f64;
    let inv_h = Complex64::new(1.0 / grid.step(), 0.0);
    let slices = freqs
        .frequencies()
        .par_iter()
        .map(|&p| {
            let m = dsum_power(&u, &spec.psi, p, spec.periods)?;
            Ok(KernelSlice::from_parts(grid.clone(), p, t, m * inv_h, kind))
        })
        .collect::<Result<Vec<_>>>()?;
    let scheme = match method {
        Method::Exact => None,
        _ => {
            let slice = fourier_slice(grid, coeffs, Complex64::new(0.0, 0.0))?;
            method.scheme(std::slice::from_ref(&slice), spec.period)?
        }
    };
    Ok(JointKernelFT::from_parts(
        grid.clone(),
        freqs.clone(),
        t,
        slices,
        scheme,
        coeffs.clone(),
    ))
}
