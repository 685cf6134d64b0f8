//! Lattice generators: the diffusion generator, its adjoint, the Fourier
//! slices of the joint generator of a diffusion and a stochastic integral,
//! and the gauge-conjugated (Ito) form of those slices.
//!
//! Convention: entry `(x, x')` of a generator is the rate from `x` to `x'`.
//! A jump `x -> x + h` advances the integral by `a(x) h` and the time drift
//! contributes `b(x) dt`; a slice at frequency `z` is the generator of
//! `E[exp(-i z y_t); x_t = x']`.

use ndarray::Array2;
use num_complex::Complex64;
use serde::Serialize;

use crate::coefficients::{CoefficientField, CoefficientRecipe};
use crate::error::{Error, Result};
use crate::lattice::{central_difference_matrix, second_difference_matrix, GridFunction, SpatialGrid};
use crate::linalg::{max_abs, CMatrix};

/// Hard cap on the refinement search.
pub const MAX_SEARCH_LEVEL: u32 = 24;

fn drift_ratio(sigma2: f64, mu: f64, h: f64) -> f64 {
    mu.abs() * h / sigma2
}

/// Worst `(site, ratio)` of `|mu| h / sigma^2` on `field`'s grid; the level
/// is admissible when the ratio is `< 1`.
fn worst_site(field: &CoefficientField) -> (f64, f64) {
    let h = field.grid().step();
    field
        .sigma2()
        .iter()
        .zip(field.mu())
        .enumerate()
        .map(|(k, (&s, &m))| (field.grid().point(k), drift_ratio(s, m, h)))
        .fold(
            (f64::NAN, f64::NEG_INFINITY),
            |acc, cur| {
                if cur.1 > acc.1 {
                    cur
                } else {
                    acc
                }
            },
        )
}

/// Smallest level `m <= cap` such that `sigma^2 / 2h^2 > |mu| / 2h` holds at
/// every site of every level from `m` through `cap`.
pub fn min_refinement_level(recipe: &CoefficientRecipe, half_width: f64, cap: u32) -> Result<u32> {
    if cap > MAX_SEARCH_LEVEL {
        return Err(Error::invalid(
            "m_cap",
            format!("search cap {cap} exceeds {MAX_SEARCH_LEVEL}"),
        ));
    }
    let mut m0 = None;
    let mut worst_failure = (f64::NAN, f64::NEG_INFINITY);
    for level in (0..=cap).rev() {
        let grid = SpatialGrid::new(level, half_width)?;
        let field = recipe.sample(&grid)?;
        let (site, ratio) = worst_site(&field);
        if ratio < 1.0 {
            m0 = Some(level);
        } else {
            worst_failure = (site, ratio);
            break;
        }
    }
    m0.ok_or(Error::NoRefinementLevel {
        cap,
        site: worst_failure.0,
        ratio: worst_failure.1,
    })
}

fn check_refinement(field: &CoefficientField) -> Result<()> {
    let (site, ratio) = worst_site(field);
    if ratio < 1.0 {
        return Ok(());
    }
    // locate the threshold on this profile, assuming it refines like the
    // sampled field (a ratio of |mu| h / sigma^2 halves with h)
    let mut min_level = None;
    let mut level = field.grid().level();
    let mut r = ratio;
    while level < MAX_SEARCH_LEVEL {
        level += 1;
        r *= 0.5;
        if r < 1.0 {
            min_level = Some(level);
            break;
        }
    }
    Err(Error::BelowRefinementThreshold {
        level: field.grid().level(),
        min_level,
        site,
        ratio,
    })
}

/// `L^m` as a dense real matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorMatrix {
    grid: SpatialGrid,
    entries: Array2<f64>,
}

impl GeneratorMatrix {
    pub fn grid(&self) -> &SpatialGrid {
        &self.grid
    }

    pub fn entries(&self) -> &Array2<f64> {
        &self.entries
    }

    pub fn to_complex(&self) -> CMatrix {
        self.entries.mapv(|v| Complex64::new(v, 0.0))
    }

    /// Largest row-sum defect relative to the largest entry.
    pub fn row_sum_defect(&self) -> f64 {
        let scale = self.entries.iter().map(|v| v.abs()).fold(1.0, f64::max);
        self.entries
            .rows()
            .into_iter()
            .map(|r| r.sum().abs())
            .fold(0.0, f64::max)
            / scale
    }

    pub fn adjoint(&self) -> Array2<f64> {
        adjoint(&self.entries)
    }
}

/// Nearest-neighbour generator with up-rate `sigma^2/2h^2 + mu/2h`,
/// down-rate `sigma^2/2h^2 - mu/2h` and diagonal `-sigma^2/h^2`.
pub fn diffusion_generator(grid: &SpatialGrid, coeffs: &CoefficientField) -> Result<GeneratorMatrix> {
    grid.check_len(coeffs.grid().len(), "coefficient field")?;
    check_refinement(coeffs)?;
    let n = grid.len();
    let h = grid.step();
    let mut entries = Array2::zeros((n, n));
    for k in 0..n {
        let (up, down) = coeffs.rates(k);
        entries[[k, grid.next(k)]] += up;
        entries[[k, grid.prev(k)]] += down;
        entries[[k, k]] -= coeffs.sigma2()[k] / (h * h);
    }
    Ok(GeneratorMatrix {
        grid: grid.clone(),
        entries,
    })
}

/// Transpose; applying it on the second index realises the forward equation.
pub fn adjoint(m: &Array2<f64>) -> Array2<f64> {
    m.t().to_owned()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Representation {
    Standard,
    Ito,
}

/// The matrix `L^m(z)` for a single complex frequency.
#[derive(Debug, Clone, PartialEq)]
pub struct FourierSlice {
    grid: SpatialGrid,
    z: Complex64,
    entries: CMatrix,
    representation: Representation,
}

impl FourierSlice {
    pub fn grid(&self) -> &SpatialGrid {
        &self.grid
    }

    pub fn z(&self) -> Complex64 {
        self.z
    }

    pub fn entries(&self) -> &CMatrix {
        &self.entries
    }

    pub fn representation(&self) -> Representation {
        self.representation
    }

    pub fn diagonal(&self) -> Vec<Complex64> {
        self.entries.diag().to_vec()
    }
}

/// Fourier slice of the stochastic-integral joint generator at frequency `z`:
/// up `(sigma^2/2h^2 + mu/2h) e^{-i h a z}`, down
/// `(sigma^2/2h^2 - mu/2h) e^{+i h a z}`, diagonal `-sigma^2/h^2 - i z b`.
pub fn fourier_slice(grid: &SpatialGrid, coeffs: &CoefficientField, z: Complex64) -> Result<FourierSlice> {
    grid.check_len(coeffs.grid().len(), "coefficient field")?;
    check_refinement(coeffs)?;
    let n = grid.len();
    let h = grid.step();
    let i = Complex64::i();
    let mut entries = CMatrix::zeros((n, n));
    for k in 0..n {
        let (up, down) = coeffs.rates(k);
        let theta = z * (h * coeffs.a()[k]);
        entries[[k, grid.next(k)]] += (-i * theta).exp() * up;
        entries[[k, grid.prev(k)]] += (i * theta).exp() * down;
        entries[[k, k]] += Complex64::new(-coeffs.sigma2()[k] / (h * h), 0.0) - i * z * coeffs.b()[k];
    }
    Ok(FourierSlice {
        grid: grid.clone(),
        z,
        entries,
        representation: Representation::Standard,
    })
}

/// Per-site coefficients of a slice written as
/// `(sigma_z^2 / 2) Delta + mu_z grad + kappa_z`.
#[derive(Debug, Clone, PartialEq)]
pub struct SliceCoefficients {
    pub sigma2_z: Vec<Complex64>,
    pub mu_z: Vec<Complex64>,
    pub kappa_z: Vec<Complex64>,
}

impl SliceCoefficients {
    /// Rebuilds the slice matrix from the three coefficient vectors.
    pub fn reassemble(&self, grid: &SpatialGrid) -> CMatrix {
        let lap = second_difference_matrix(grid);
        let grad = central_difference_matrix(grid);
        let n = grid.len();
        CMatrix::from_shape_fn((n, n), |(r, c)| {
            let mut v = self.sigma2_z[r] * 0.5 * lap[[r, c]] + self.mu_z[r] * grad[[r, c]];
            if r == c {
                v += self.kappa_z[r];
            }
            v
        })
    }
}

/// With `theta = h a(x) z`:
/// `sigma_z^2 = sigma^2 cos(theta) - i h mu sin(theta)`,
/// `mu_z = mu cos(theta) - i sigma^2 sin(theta) / h`,
/// `kappa_z = -i mu sin(theta) / h + sigma^2 (cos(theta) - 1) / h^2 - i z b`.
pub fn slice_coefficients(grid: &SpatialGrid, coeffs: &CoefficientField, z: Complex64) -> Result<SliceCoefficients> {
    grid.check_len(coeffs.grid().len(), "coefficient field")?;
    check_refinement(coeffs)?;
    let h = grid.step();
    let i = Complex64::i();
    let n = grid.len();
    let mut out = SliceCoefficients {
        sigma2_z: Vec::with_capacity(n),
        mu_z: Vec::with_capacity(n),
        kappa_z: Vec::with_capacity(n),
    };
    for k in 0..n {
        let s2 = coeffs.sigma2()[k];
        let mu = coeffs.mu()[k];
        let theta = z * (h * coeffs.a()[k]);
        let (sin, cos) = (theta.sin(), theta.cos());
        out.sigma2_z.push(cos * s2 - i * sin * (h * mu));
        out.mu_z.push(cos * mu - i * sin * (s2 / h));
        out.kappa_z
            .push(-i * sin * (mu / h) + (cos - 1.0) * (s2 / (h * h)) - i * z * coeffs.b()[k]);
    }
    Ok(out)
}

/// `phi_m(x) = h * sum_{x' <= x} a(x')`.
pub fn gauge_phase(grid: &SpatialGrid, coeffs: &CoefficientField) -> Result<GridFunction> {
    grid.check_len(coeffs.grid().len(), "coefficient field")?;
    let h = grid.step();
    let mut acc = 0.0;
    let values: Vec<f64> = coeffs
        .a()
        .iter()
        .map(|&a| {
            acc += a;
            h * acc
        })
        .collect();
    GridFunction::from_real(grid, &values)
}

/// Diagonal of the gauge `D(z) = diag(e^{+i z phi_m(x)})`.
pub fn gauge_diagonal(grid: &SpatialGrid, coeffs: &CoefficientField, z: Complex64) -> Result<Vec<Complex64>> {
    let phi = gauge_phase(grid, coeffs)?;
    let i = Complex64::i();
    Ok(phi.values().iter().map(|p| (i * z * p.re).exp()).collect())
}

/// `D(z)^{-1} L(z) D(z)` with `D(z) = diag(e^{i z phi_m})`.
///
/// The conjugation cancels the hopping phase `e^{-i h a(x) z}` up to
/// `e^{i z h (a(x+h) - a(x))}`, which leaves the Ito drift
/// `(i z sigma^2 / 2) a'(x)` in the continuum limit. Across the periodic seam
/// the phase does not cancel.
pub fn ito_slice(grid: &SpatialGrid, coeffs: &CoefficientField, z: Complex64) -> Result<FourierSlice> {
    let standard = fourier_slice(grid, coeffs, z)?;
    let d = gauge_diagonal(grid, coeffs, z)?;
    let n = grid.len();
    let entries = CMatrix::from_shape_fn((n, n), |(r, c)| standard.entries[[r, c]] * d[c] / d[r]);
    Ok(FourierSlice {
        grid: grid.clone(),
        z,
        entries,
        representation: Representation::Ito,
    })
}

/// Undoes [`ito_slice`]: `D(z) M D(z)^{-1}`.
pub fn undo_gauge(m: &CMatrix, gauge: &[Complex64]) -> CMatrix {
    CMatrix::from_shape_fn(m.dim(), |(r, c)| m[[r, c]] * gauge[r] / gauge[c])
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CommutationReport {
    /// Largest `||AB - BA||_inf` over all pairs.
    pub max_defect: f64,
    /// Pair attaining it.
    pub worst_pair: Option<(usize, usize)>,
    pub tolerance: f64,
    pub passed: bool,
}

/// Checks that a family of square matrices commutes pairwise.
pub fn commutation_check(matrices: &[CMatrix], tolerance: f64) -> Result<CommutationReport> {
    if let Some(first) = matrices.first() {
        if !first.is_square() {
            return Err(Error::DimensionMismatch("matrices must be square".into()));
        }
        if let Some(bad) = matrices.iter().position(|m| m.dim() != first.dim()) {
            return Err(Error::DimensionMismatch(format!(
                "matrix {bad} has shape {:?}, expected {:?}",
                matrices[bad].dim(),
                first.dim()
            )));
        }
    }
    let mut max_defect = 0.0;
    let mut worst_pair = None;
    for (i, a) in matrices.iter().enumerate() {
        for (j, b) in matrices.iter().enumerate().skip(i + 1) {
            let comm = a.dot(b) - b.dot(a);
            let defect = crate::linalg::inf_norm(&comm);
            if defect > max_defect || worst_pair.is_none() {
                max_defect = defect;
                worst_pair = Some((i, j));
            }
        }
    }
    Ok(CommutationReport {
        max_defect,
        worst_pair,
        tolerance,
        passed: max_defect <= tolerance,
    })
}

/// Relative entrywise distance `max|a - b| / max|b|`.
pub fn relative_distance(a: &CMatrix, b: &CMatrix) -> f64 {
    crate::linalg::max_abs_diff(a, b) / max_abs(b).max(f64::MIN_POSITIVE)
}
