//! Norms, refinement studies and analyticity diagnostics.
//!
//! The graph norm of a kernel `f` with respect to a generator `L` is
//! `||f|| + ||L_x f|| + ||L*_x' f||` in the uniform norm, with `L` acting on
//! the first index and its adjoint on the second. Over a disc of complex
//! frequencies each term takes its supremum over a finite sample set.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;
use std::f64::consts::PI;

use crate::coefficients::CoefficientRecipe;
use crate::error::{Error, Result};
use crate::generators::{diffusion_generator, fourier_slice, FourierSlice, GeneratorMatrix};
use crate::lattice::SpatialGrid;
use crate::linalg::{max_abs, CMatrix};
use crate::propagation::{euler_kernel, exact_kernel, EulerScheme};

/// Largest entry modulus.
pub fn uniform_norm(kernel: &CMatrix) -> Result<f64> {
    if kernel.is_empty() {
        return Err(Error::Empty("kernel"));
    }
    Ok(max_abs(kernel))
}

/// Largest entry modulus over a family of kernels.
pub fn uniform_norm_family(kernels: &[CMatrix]) -> Result<f64> {
    if kernels.is_empty() {
        return Err(Error::Empty("kernel family"));
    }
    kernels
        .iter()
        .map(uniform_norm)
        .try_fold(0.0f64, |acc, v| Ok(acc.max(v?)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GraphNormReport {
    pub uniform: f64,
    pub gen_term: f64,
    pub adj_term: f64,
    pub total: f64,
    pub disc_radius: Option<f64>,
    pub z_samples: usize,
}

impl GraphNormReport {
    fn new(uniform: f64, gen_term: f64, adj_term: f64) -> Self {
        Self {
            uniform,
            gen_term,
            adj_term,
            total: uniform + gen_term + adj_term,
            disc_radius: None,
            z_samples: 1,
        }
    }
}

/// `||f|| + ||L f|| + ||f L||`: `L f` applies the generator on the first
/// index, `f L` applies its adjoint on the second.
pub fn graph_norm(kernel: &CMatrix, gen: &GeneratorMatrix) -> Result<GraphNormReport> {
    let n = gen.grid().len();
    if kernel.dim() != (n, n) {
        return Err(Error::DimensionMismatch(format!(
            "kernel is {:?}, generator is {n}x{n}",
            kernel.dim()
        )));
    }
    let l = gen.to_complex();
    Ok(GraphNormReport::new(
        uniform_norm(kernel)?,
        max_abs(&l.dot(kernel)),
        max_abs(&kernel.dot(&l)),
    ))
}

/// Graph norm over a frequency sample: every term is the supremum over the
/// family.
pub fn graph_norm_family(
    kernels: &[CMatrix],
    gen: &GeneratorMatrix,
    disc_radius: Option<f64>,
) -> Result<GraphNormReport> {
    if kernels.is_empty() {
        return Err(Error::Empty("kernel family"));
    }
    let reports = kernels.iter().map(|k| graph_norm(k, gen)).collect::<Result<Vec<_>>>()?;
    let sup = |f: fn(&GraphNormReport) -> f64| reports.iter().map(f).fold(0.0, f64::max);
    let mut out = GraphNormReport::new(sup(|r| r.uniform), sup(|r| r.gen_term), sup(|r| r.adj_term));
    out.disc_radius = disc_radius;
    out.z_samples = kernels.len();
    Ok(out)
}

/// Samples the kernel of level `m + 1` at the points of level `m`, which are
/// its even-index points. Both kernels carry their own `1/h`, so the values
/// are directly comparable densities.
pub fn restrict_to_coarse(fine: &CMatrix, fine_grid: &SpatialGrid, coarse_grid: &SpatialGrid) -> Result<CMatrix> {
    if fine_grid.level() != coarse_grid.level() + 1 || fine_grid.half_width() != coarse_grid.half_width() {
        return Err(Error::LevelMismatch {
            fine: fine_grid.level(),
            coarse: coarse_grid.level(),
        });
    }
    let n = fine_grid.len();
    if fine.dim() != (n, n) {
        return Err(Error::DimensionMismatch(format!(
            "fine kernel is {:?}, grid has {n} points",
            fine.dim()
        )));
    }
    let m = coarse_grid.len();
    Ok(CMatrix::from_shape_fn((m, m), |(r, c)| fine[[2 * r, 2 * c]]))
}

/// Ordinary least-squares slope of `y` against `x`, and the root mean square
/// residual of the fit.
pub fn fit_slope(x: &[f64], y: &[f64]) -> (f64, f64) {
    assert_eq!(x.len(), y.len());
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = x.iter().zip(y).map(|(a, b)| (b - intercept - slope * a).powi(2)).sum();
    (slope, (rss / n).sqrt())
}

/// Kernels of one refinement level over a shared frequency sample.
#[derive(Debug, Clone)]
pub struct LevelKernels {
    pub grid: SpatialGrid,
    pub generator: GeneratorMatrix,
    pub kernels: Vec<CMatrix>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StudyContext {
    pub t: f64,
    pub disc_radius: f64,
    pub z_samples: Vec<[f64; 2]>,
    pub family: String,
    pub method: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceReport {
    /// Level at which each gap is measured.
    pub levels: Vec<u32>,
    pub steps: Vec<f64>,
    pub gaps: Vec<f64>,
    pub fitted_rate: f64,
    pub fit_residual: f64,
    pub context: StudyContext,
}

impl ConvergenceReport {
    pub fn log_pairs(&self) -> Vec<(f64, f64)> {
        self.steps
            .iter()
            .zip(&self.gaps)
            .map(|(h, g)| (h.ln(), g.ln()))
            .collect()
    }

    fn from_gaps(levels: Vec<u32>, steps: Vec<f64>, gaps: Vec<f64>, context: StudyContext) -> Result<Self> {
        if let Some(k) = gaps.iter().position(|g| !(*g > 0.0 && g.is_finite())) {
            return Err(Error::invalid(
                "gaps",
                format!("gap at level {} is {}, rates need positive gaps", levels[k], gaps[k]),
            ));
        }
        let lx: Vec<f64> = steps.iter().map(|h| h.ln()).collect();
        let ly: Vec<f64> = gaps.iter().map(|g| g.ln()).collect();
        let (fitted_rate, fit_residual) = if gaps.len() >= 2 {
            fit_slope(&lx, &ly)
        } else {
            (f64::NAN, f64::NAN)
        };
        Ok(Self {
            levels,
            steps,
            gaps,
            fitted_rate,
            fit_residual,
            context,
        })
    }
}

/// Fits `log gap` against `log h` for externally computed gaps.
pub fn rate_from_gaps(levels: &[u32], steps: &[f64], gaps: &[f64], context: StudyContext) -> Result<ConvergenceReport> {
    if levels.len() != gaps.len() || steps.len() != gaps.len() {
        return Err(Error::DimensionMismatch(
            "levels, steps and gaps differ in length".into(),
        ));
    }
    if gaps.len() < 2 {
        return Err(Error::invalid("gaps", "need at least two gaps"));
    }
    ConvergenceReport::from_gaps(levels.to_vec(), steps.to_vec(), gaps.to_vec(), context)
}

/// `gap(m) = max_z ||restrict(u_{m+1}(z)) - u_m(z)||` in the level-`m`
/// graph norm, then the least-squares slope of `log gap` against `log h_m`.
pub fn convergence_rate(levels: &[LevelKernels], context: StudyContext) -> Result<ConvergenceReport> {
    if levels.len() < 3 {
        return Err(Error::invalid(
            "levels",
            format!("need at least 3 consecutive levels, got {}", levels.len()),
        ));
    }
    let mut ms = Vec::new();
    let mut steps = Vec::new();
    let mut gaps = Vec::new();
    for pair in levels.windows(2) {
        let (coarse, fine) = (&pair[0], &pair[1]);
        if coarse.kernels.len() != fine.kernels.len() {
            return Err(Error::DimensionMismatch(
                "levels use different frequency samples".into(),
            ));
        }
        let mut gap = 0.0f64;
        for (kc, kf) in coarse.kernels.iter().zip(&fine.kernels) {
            let diff = restrict_to_coarse(kf, &fine.grid, &coarse.grid)? - kc;
            gap = gap.max(graph_norm(&diff, &coarse.generator)?.total);
        }
        ms.push(coarse.grid.level());
        steps.push(coarse.grid.step());
        gaps.push(gap);
    }
    ConvergenceReport::from_gaps(ms, steps, gaps, context)
}

/// Default complex sample of the disc `|z| <= K`: `0, +-K/2, +-K, +-iK/2,
/// +-iK` and eight points on `|z| = K`, without duplicates.
pub fn default_disc_samples(radius: f64) -> Vec<Complex64> {
    let mut out: Vec<Complex64> = vec![Complex64::new(0.0, 0.0)];
    for r in [radius / 2.0, radius] {
        out.extend([
            Complex64::new(r, 0.0),
            Complex64::new(-r, 0.0),
            Complex64::new(0.0, r),
            Complex64::new(0.0, -r),
        ]);
    }
    for k in 0..8 {
        let z = Complex64::from_polar(radius, k as f64 * PI / 4.0);
        if out.iter().all(|w| (w - z).norm() > 1e-12 * radius.max(1.0)) {
            out.push(z);
        }
    }
    out
}

/// Discrete Cauchy mean-value test: `|f(z0) - mean_q f(z0 + r e^{i theta_q})|`
/// with `Q` equally spaced angles.
pub fn analyticity_residual<F>(f: F, z0: Complex64, radius: f64, points: usize) -> Result<f64>
where
    F: Fn(Complex64) -> Result<Complex64>,
{
    if !(radius > 0.0) {
        return Err(Error::invalid("radius", "must be positive"));
    }
    if points < 16 {
        return Err(Error::invalid("points", format!("need at least 16, got {points}")));
    }
    let wrap = |z: Complex64| {
        f(z).map_err(|e| Error::Sampler {
            z,
            reason: e.to_string(),
        })
    };
    let centre = wrap(z0)?;
    let mut sum = Complex64::new(0.0, 0.0);
    for q in 0..points {
        let theta = 2.0 * PI * q as f64 / points as f64;
        sum += wrap(z0 + Complex64::from_polar(radius, theta))?;
    }
    Ok((centre - sum / points as f64).norm())
}

/// Kernel propagation method used in a refinement study.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StudyMethod {
    Exact,
    /// Euler at `safety` times the Courant bound of the sampled family, with
    /// `dt` shrunk so that the steps land exactly on `t`.
    Euler {
        safety: f64,
    },
}

fn level_slices(
    recipe: &CoefficientRecipe,
    half_width: f64,
    level: u32,
    samples: &[Complex64],
) -> Result<(SpatialGrid, GeneratorMatrix, Vec<FourierSlice>)> {
    let grid = SpatialGrid::new(level, half_width)?;
    let field = recipe.sample(&grid)?;
    let gen = diffusion_generator(&grid, &field)?;
    let slices = samples
        .iter()
        .map(|&z| fourier_slice(&grid, &field, z))
        .collect::<Result<Vec<_>>>()?;
    Ok((grid, gen, slices))
}

fn level_kernels(
    recipe: &CoefficientRecipe,
    half_width: f64,
    level: u32,
    t: f64,
    samples: &[Complex64],
    method: StudyMethod,
) -> Result<LevelKernels> {
    let (grid, generator, slices) = level_slices(recipe, half_width, level, samples)?;
    let kernels = match method {
        StudyMethod::Exact => slices
            .par_iter()
            .map(|s| exact_kernel(s, t).map(|k| k.into_entries()))
            .collect::<Result<Vec<_>>>()?,
        StudyMethod::Euler { safety } => {
            let scheme = EulerScheme::aligned_at_courant(&slices, t, safety)?;
            slices
                .par_iter()
                .map(|s| euler_kernel(s, t, &scheme).map(|k| k.into_entries()))
                .collect::<Result<Vec<_>>>()?
        }
    };
    Ok(LevelKernels {
        grid,
        generator,
        kernels,
    })
}

fn context(t: f64, radius: f64, samples: &[Complex64], family: &str, method: &str) -> StudyContext {
    StudyContext {
        t,
        disc_radius: radius,
        z_samples: samples.iter().map(|z| [z.re, z.im]).collect(),
        family: family.to_string(),
        method: method.to_string(),
    }
}

/// Inter-level refinement study of the Fourier-transformed kernel over the
/// disc samples of radius `radius`.
pub fn kernel_convergence_study(
    recipe: &CoefficientRecipe,
    half_width: f64,
    levels: &[u32],
    t: f64,
    radius: f64,
    method: StudyMethod,
) -> Result<ConvergenceReport> {
    check_consecutive(levels)?;
    let samples = default_disc_samples(radius);
    let per_level = levels
        .iter()
        .map(|&m| level_kernels(recipe, half_width, m, t, &samples, method))
        .collect::<Result<Vec<_>>>()?;
    let label = match method {
        StudyMethod::Exact => "exact".to_string(),
        StudyMethod::Euler { safety } => format!("euler(safety={safety})"),
    };
    convergence_rate(&per_level, context(t, radius, &samples, &format!("{recipe:?}"), &label))
}

/// Same-level gap between the Euler kernel at `safety` times the Courant
/// bound and the exact kernel, measured in the level's own graph norm.
pub fn euler_gap_study(
    recipe: &CoefficientRecipe,
    half_width: f64,
    levels: &[u32],
    t: f64,
    radius: f64,
    safety: f64,
) -> Result<ConvergenceReport> {
    if levels.len() < 2 {
        return Err(Error::invalid("levels", "need at least two levels"));
    }
    let samples = default_disc_samples(radius);
    let mut steps = Vec::new();
    let mut gaps = Vec::new();
    for &m in levels {
        let exact = level_kernels(recipe, half_width, m, t, &samples, StudyMethod::Exact)?;
        let euler = level_kernels(recipe, half_width, m, t, &samples, StudyMethod::Euler { safety })?;
        let mut gap = 0.0f64;
        for (a, b) in exact.kernels.iter().zip(&euler.kernels) {
            gap = gap.max(graph_norm(&(b - a), &exact.generator)?.total);
        }
        steps.push(exact.grid.step());
        gaps.push(gap);
    }
    ConvergenceReport::from_gaps(
        levels.to_vec(),
        steps,
        gaps,
        context(
            t,
            radius,
            &samples,
            &format!("{recipe:?}"),
            &format!("euler-vs-exact(safety={safety})"),
        ),
    )
}

fn check_consecutive(levels: &[u32]) -> Result<()> {
    if levels.len() < 3 {
        return Err(Error::invalid(
            "levels",
            format!("need at least 3 levels, got {}", levels.len()),
        ));
    }
    if levels.windows(2).any(|w| w[1] != w[0] + 1) {
        return Err(Error::invalid(
            "levels",
            format!("levels must be consecutive, got {levels:?}"),
        ));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coefficients::CoefficientField;
    use crate::linalg::identity;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn rand_matrix(n: usize, seed: u64) -> CMatrix {
        let mut s = seed;
        CMatrix::from_shape_fn((n, n), |_| {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            let a = (s >> 11) as f64 / (1u64 << 53) as f64 - 0.5;
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            let b = (s >> 11) as f64 / (1u64 << 53) as f64 - 0.5;
            c(a, b)
        })
    }

    #[test]
    fn uniform_norm_examples() {
        assert_eq!(uniform_norm(&CMatrix::zeros((3, 3))).unwrap(), 0.0);
        assert_eq!(uniform_norm(&(identity(4) / c(0.25, 0.0))).unwrap(), 4.0);
        let m = rand_matrix(7, 5);
        let mut scan = 0.0f64;
        for r in 0..7 {
            for col in 0..7 {
                scan = scan.max(m[[r, col]].norm());
            }
        }
        assert_eq!(uniform_norm(&m).unwrap(), scan);
        assert!(uniform_norm(&CMatrix::zeros((0, 0))).is_err());
        assert!(uniform_norm_family(&[]).is_err());
    }

    fn symmetric_generator() -> GeneratorMatrix {
        let g = SpatialGrid::new(1, 1.0).unwrap();
        let f = CoefficientField::constant(&g, 1.0, 0.0, 0.0, 0.0).unwrap();
        diffusion_generator(&g, &f).unwrap()
    }

    #[test]
    fn graph_norm_examples() {
        let gen = symmetric_generator();
        let zero = graph_norm(&CMatrix::zeros((4, 4)), &gen).unwrap();
        assert_eq!(zero.total, 0.0);
        let flat = graph_norm(&CMatrix::from_elem((4, 4), c(3.0, 0.0)), &gen).unwrap();
        assert_eq!(flat.uniform, 3.0);
        assert_eq!(flat.gen_term, 0.0);
        assert_eq!(flat.adj_term, 0.0);
        assert!(graph_norm(&CMatrix::zeros((3, 3)), &gen).is_err());
    }

    #[test]
    fn graph_norm_by_hand() {
        // h = 1/2, sigma^2 = 1, mu = 0: rates 2 to each neighbour, -4 on the diagonal
        let gen = symmetric_generator();
        let f = CMatrix::from_shape_fn(
            (4, 4),
            |(r, col)| if r == 0 && col == 0 { c(1.0, 0.0) } else { c(0.0, 0.0) },
        );
        // L f has only column 0: rows 0,1,3 -> (-4, 2, 0, 2); f L has only row 0: (-4, 2, 0, 2)
        let r = graph_norm(&f, &gen).unwrap();
        assert_eq!((r.uniform, r.gen_term, r.adj_term, r.total), (1.0, 4.0, 4.0, 9.0));
    }

    #[test]
    fn graph_norm_is_a_norm() {
        let g = SpatialGrid::new(2, 1.0).unwrap();
        let field = CoefficientRecipe::smooth().sample(&g).unwrap();
        let gen = diffusion_generator(&g, &field).unwrap();
        for seed in 0..10 {
            let a = rand_matrix(8, seed);
            let b = rand_matrix(8, seed + 100);
            let na = graph_norm(&a, &gen).unwrap().total;
            let nb = graph_norm(&b, &gen).unwrap().total;
            let nab = graph_norm(&(&a + &b), &gen).unwrap().total;
            assert!(nab <= na + nb + 1e-12 * (na + nb));
            let lambda = c(-1.7, 0.6);
            let scaled = graph_norm(&(&a * lambda), &gen).unwrap().total;
            assert!((scaled - lambda.norm() * na).abs() <= 1e-12 * na.max(1.0));
        }
    }

    #[test]
    fn restriction_examples() {
        let fine = SpatialGrid::new(3, 1.0).unwrap();
        let coarse = SpatialGrid::new(2, 1.0).unwrap();
        let flat = CMatrix::from_elem((16, 16), c(0.7, 0.1));
        let r = restrict_to_coarse(&flat, &fine, &coarse).unwrap();
        assert!(r.iter().all(|v| *v == c(0.7, 0.1)));
        for k in 0..coarse.len() {
            assert_eq!(coarse.point(k), fine.point(2 * k));
        }
        let tagged = CMatrix::from_shape_fn((16, 16), |(a, b)| c(a as f64, b as f64));
        let r = restrict_to_coarse(&tagged, &fine, &coarse).unwrap();
        assert_eq!(r[[3, 5]], c(6.0, 10.0));
        let too_fine = SpatialGrid::new(4, 1.0).unwrap();
        assert!(matches!(
            restrict_to_coarse(&flat, &too_fine, &coarse),
            Err(Error::LevelMismatch { .. })
        ));
    }

    #[test]
    fn restricted_diffusion_kernels_are_close() {
        let recipe = CoefficientRecipe::constant(1.0, 0.0, 0.0, 0.0);
        let zero = [c(0.0, 0.0)];
        let k4 = level_kernels(&recipe, 1.0, 4, 0.1, &zero, StudyMethod::Exact).unwrap();
        let k5 = level_kernels(&recipe, 1.0, 5, 0.1, &zero, StudyMethod::Exact).unwrap();
        let diff = restrict_to_coarse(&k5.kernels[0], &k5.grid, &k4.grid).unwrap() - &k4.kernels[0];
        let gap = uniform_norm(&diff).unwrap();
        let scale = uniform_norm(&k4.kernels[0]).unwrap();
        assert!(gap.is_finite() && gap > 0.0);
        // second-order lattice error at h = 1/16, t = 0.1 is far below the kernel scale
        assert!(gap < 0.02 * scale, "{gap} vs {scale}");
    }

    #[test]
    fn rate_of_synthetic_gaps() {
        let ctx = || context(1.0, 1.0, &[], "synthetic", "none");
        let levels = [3u32, 4, 5, 6, 7];
        let steps: Vec<f64> = levels.iter().map(|m| 2f64.powi(-(*m as i32))).collect();
        let quad: Vec<f64> = levels.iter().map(|m| 3.7 * 2f64.powi(-2 * *m as i32)).collect();
        let r = rate_from_gaps(&levels, &steps, &quad, ctx()).unwrap();
        assert!((r.fitted_rate - 2.0).abs() < 1e-10);
        assert!(r.fit_residual < 1e-10);
        let lin: Vec<f64> = levels.iter().map(|m| 0.2 * 2f64.powi(-(*m as i32))).collect();
        let r = rate_from_gaps(&levels, &steps, &lin, ctx()).unwrap();
        assert!((r.fitted_rate - 1.0).abs() < 1e-10);
        assert!(rate_from_gaps(&levels, &steps, &[1.0, 0.0, 1.0, 1.0, 1.0], ctx()).is_err());
    }

    #[test]
    fn convergence_needs_three_levels() {
        let recipe = CoefficientRecipe::smooth();
        assert!(kernel_convergence_study(&recipe, 1.0, &[3, 4], 0.1, 1.0, StudyMethod::Exact).is_err());
        assert!(kernel_convergence_study(&recipe, 1.0, &[3, 5, 6], 0.1, 1.0, StudyMethod::Exact).is_err());
        assert!(convergence_rate(&[], context(0.0, 0.0, &[], "", "")).is_err());
    }

    #[test]
    fn disc_samples() {
        let s = default_disc_samples(2.0);
        assert_eq!(s.len(), 13);
        assert!(s.iter().all(|z| z.norm() <= 2.0 + 1e-12));
        assert!(s.contains(&c(0.0, 0.0)));
        assert!(s.contains(&c(0.0, -1.0)));
    }

    #[test]
    fn mean_value_examples() {
        let sq = analyticity_residual(|z| Ok(z * z), c(0.0, 0.0), 1.0, 32).unwrap();
        assert!(sq < 1e-15);
        let pole = analyticity_residual(|z| Ok(1.0 / (z - 0.5)), c(0.0, 0.0), 1.0, 32).unwrap();
        // the circle mean of 1/(z - 1/2) is 0 while the centre value is -2
        assert!((pole - 2.0).abs() < 1e-9, "{pole}");
        assert!(analyticity_residual(Ok, c(0.0, 0.0), 1.0, 8).is_err());
        let failing = analyticity_residual(|_| Err(Error::Empty("x")), c(0.0, 0.0), 1.0, 16);
        assert!(matches!(failing, Err(Error::Sampler { .. })));
    }

    #[test]
    fn kernel_entries_pass_the_mean_value_test() {
        let g = SpatialGrid::new(3, 1.0).unwrap();
        let f = CoefficientRecipe::smooth().sample(&g).unwrap();
        let entry = |z: Complex64| -> Result<Complex64> {
            let s = fourier_slice(&g, &f, z)?;
            Ok(exact_kernel(&s, 0.25)?.entries()[[3, 5]])
        };
        let scale = entry(c(0.0, 0.0)).unwrap().norm();
        for q in [16, 32] {
            let r = analyticity_residual(entry, c(0.3, -0.2), 1.5, q).unwrap();
            assert!(r < 1e-10 * scale, "Q={q}: {r}");
        }
    }
}
