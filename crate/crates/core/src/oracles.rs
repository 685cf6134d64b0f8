//! Independent references: exact enumeration of the Euler chain, image-sum
//! heat kernels and closed-form Brownian laws.
//!
//! The enumeration runs on the real chain, before any Fourier transform. A
//! jump from `x` moves the integral by `+-a(x) h` (departure-state
//! convention). The Euler stay weight `1 - dt sigma^2/h^2 - i z b dt` is
//! affine in `z`, so the `b dt` drift is carried as a separate "drift event"
//! of weight `b(x) dt` that contributes a factor `-iz` to the transform. This
//! keeps the table finite and matches the Euler slice exactly for complex
//! `z`. Transforms use `E[e^{-izy}]`, the convention of the slices.

use num_complex::Complex64;
use serde::Serialize;
use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::io::Write;

use crate::coefficients::CoefficientField;
use crate::error::{Error, Result};
use crate::generators::diffusion_generator;
use crate::lattice::SpatialGrid;

/// Upper bound on `grid_size^N`.
pub const ENUMERATION_WORK_LIMIT: f64 = 1e7;

/// Keys of `y` are rounded to this resolution so that equal sums computed in
/// different orders land in one entry.
const Y_KEY_SCALE: f64 = 1e12;

/// One entry of the joint table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PathOutcome {
    pub terminal: usize,
    /// Accumulated `sum a(x_k) (x_{k+1} - x_k)`.
    pub y: f64,
    /// Number of drift events along the path.
    pub drift_events: u32,
    /// Total real weight of all paths with this key.
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PathEnumeration {
    grid: SpatialGrid,
    dt: f64,
    steps: u32,
    start: usize,
    outcomes: Vec<PathOutcome>,
}

impl PathEnumeration {
    pub fn grid(&self) -> &SpatialGrid {
        &self.grid
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn steps(&self) -> u32 {
        self.steps
    }

    pub fn start(&self) -> usize {
        self.start
    }

    /// Sorted by terminal site, then drift events, then `y`.
    pub fn outcomes(&self) -> &[PathOutcome] {
        &self.outcomes
    }

    /// `sum weight e^{-izy} (-iz)^j` per terminal site: row `x0` of
    /// `(I + dt L(z))^N`.
    pub fn characteristic(&self, z: Complex64) -> Vec<Complex64> {
        let mut row = vec![Complex64::new(0.0, 0.0); self.grid.len()];
        let minus_iz = -Complex64::i() * z;
        for o in &self.outcomes {
            row[o.terminal] += o.weight * (minus_iz * o.y).exp() * minus_iz.powu(o.drift_events);
        }
        row
    }

    /// Terminal law: weights without drift events, summed over `y`.
    pub fn marginal(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.grid.len()];
        for o in self.outcomes.iter().filter(|o| o.drift_events == 0) {
            out[o.terminal] += o.weight;
        }
        out
    }

    /// Mass at `z = 0`.
    pub fn total_mass(&self) -> f64 {
        self.marginal().iter().sum()
    }

    /// Smallest weight among entries that survive at `z = 0`.
    pub fn min_weight(&self) -> f64 {
        self.outcomes
            .iter()
            .filter(|o| o.drift_events == 0)
            .map(|o| o.weight)
            .fold(f64::INFINITY, f64::min)
    }

    /// Columns `x', y, drift_events, weight`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "x',y,drift_events,weight")?;
        for o in &self.outcomes {
            writeln!(
                out,
                "{},{},{},{}",
                self.grid.point(o.terminal),
                o.y,
                o.drift_events,
                o.weight
            )?;
        }
        Ok(())
    }
}

fn y_key(y: f64) -> i64 {
    (y * Y_KEY_SCALE).round() as i64
}

/// Exact joint law of `(x_N, y_N)` for `N` Euler steps of size `dt` from the
/// grid point `x0`.
pub fn enumerate_euler_paths(
    grid: &SpatialGrid,
    coeffs: &CoefficientField,
    dt: f64,
    steps: u32,
    x0: f64,
) -> Result<PathEnumeration> {
    grid.check_len(coeffs.grid().len(), "coefficient field")?;
    // the generator carries the refinement-threshold check
    diffusion_generator(grid, coeffs)?;
    let start = grid
        .index_of(x0)
        .ok_or_else(|| Error::invalid("x0", format!("{x0} is not a grid point")))?;
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::invalid("dt", format!("must be positive, got {dt}")));
    }
    let work = (grid.len() as f64).powi(steps as i32);
    if work > ENUMERATION_WORK_LIMIT {
        return Err(Error::WorkGuard(format!(
            "{} sites ^ {steps} steps = {work:e} exceeds {ENUMERATION_WORK_LIMIT:e}",
            grid.len()
        )));
    }
    let h = grid.step();
    let n = grid.len();
    for k in 0..n {
        let diag = -coeffs.sigma2()[k] / (h * h);
        let value = 1.0 + dt * diag;
        if value <= 0.0 {
            return Err(Error::Courant {
                site: grid.point(k),
                z: Complex64::new(0.0, 0.0),
                diag: Complex64::new(diag, 0.0),
                dt,
                value,
                bound: -1.0 / diag,
            });
        }
    }

    type Key = (usize, u32, i64);
    let mut table: BTreeMap<Key, (f64, f64)> = BTreeMap::new();
    table.insert((start, 0, 0), (0.0, 1.0));
    for _ in 0..steps {
        let mut next: BTreeMap<Key, (f64, f64)> = BTreeMap::new();
        let mut push = |site: usize, j: u32, y: f64, w: f64| {
            let e = next.entry((site, j, y_key(y))).or_insert((y, 0.0));
            e.1 += w;
        };
        for (&(x, j, _), &(y, w)) in &table {
            let (up, down) = coeffs.rates(x);
            let jump = coeffs.a()[x] * h;
            push(grid.next(x), j, y + jump, w * dt * up);
            push(grid.prev(x), j, y - jump, w * dt * down);
            push(x, j, y, w * (1.0 - dt * coeffs.sigma2()[x] / (h * h)));
            let b = coeffs.b()[x];
            if b != 0.0 {
                push(x, j + 1, y, w * dt * b);
            }
        }
        table = next;
    }
    let outcomes = table
        .into_iter()
        .map(|((terminal, drift_events, _), (y, weight))| PathOutcome {
            terminal,
            y,
            drift_events,
            weight,
        })
        .collect();
    Ok(PathEnumeration {
        grid: grid.clone(),
        dt,
        steps,
        start,
        outcomes,
    })
}

fn gaussian(d: f64, variance: f64) -> f64 {
    (-d * d / (2.0 * variance)).exp() / (2.0 * PI * variance).sqrt()
}

fn check_positive(name: &'static str, v: f64) -> Result<()> {
    if !(v > 0.0 && v.is_finite()) {
        return Err(Error::invalid(name, format!("must be positive, got {v}")));
    }
    Ok(())
}

/// Gaussian of variance `sigma2 t` wrapped onto `[-L, L)` with `images`
/// copies on each side.
pub fn periodic_heat_kernel(sigma2: f64, t: f64, x: f64, x_prime: f64, half_width: f64, images: u32) -> Result<f64> {
    check_positive("sigma2", sigma2)?;
    check_positive("t", t)?;
    check_positive("half_width", half_width)?;
    if images < 3 {
        return Err(Error::invalid("images", format!("need at least 3, got {images}")));
    }
    let k = images as i64;
    Ok((-k..=k)
        .map(|j| gaussian(x_prime - x + 2.0 * j as f64 * half_width, sigma2 * t))
        .sum())
}

/// Joint density of `(B_t, max_{s<=t} B_s)` for standard Brownian motion
/// from 0; zero off the support `y >= max(0, x)`.
pub fn bm_sup_density(t: f64, x: f64, y: f64) -> f64 {
    if !(t > 0.0) || y < 0.0 || y < x {
        return 0.0;
    }
    let u = 2.0 * y - x;
    2.0 * u / (2.0 * PI * t.powi(3)).sqrt() * (-u * u / (2.0 * t)).exp()
}

fn normal_cdf(v: f64) -> f64 {
    0.5 * libm::erfc(-v / std::f64::consts::SQRT_2)
}

/// `P(B_t <= x, max B <= y)` for standard Brownian motion from 0.
pub fn bm_sup_cdf(t: f64, x: f64, y: f64) -> f64 {
    if y <= 0.0 {
        return 0.0;
    }
    let s = t.sqrt();
    let x = x.min(y);
    normal_cdf(x / s) - normal_cdf((x - 2.0 * y) / s)
}

/// Mass of `(B_t, max B)` in `[x1, x2] x [y1, y2]`.
pub fn bm_sup_cell_mass(t: f64, (x1, x2): (f64, f64), (y1, y2): (f64, f64)) -> f64 {
    bm_sup_cdf(t, x2, y2) - bm_sup_cdf(t, x1, y2) - bm_sup_cdf(t, x2, y1) + bm_sup_cdf(t, x1, y1)
}

/// `e^{-ip(a (x' - x) + b t)}` times the free-line Gaussian of mean `mu t`
/// and variance `sigma2 t` at `x' - x`.
#[allow(clippy::too_many_arguments)]
pub fn constant_coeff_char(a: f64, b: f64, sigma2: f64, mu: f64, p: f64, t: f64, x: f64, x_prime: f64) -> Complex64 {
    let d = x_prime - x;
    let phase = Complex64::new(0.0, -p * (a * d + b * t)).exp();
    phase * gaussian(d - mu * t, sigma2 * t)
}

/// Upper bound on the probability that a Brownian path with variance rate
/// `sigma2` moves more than `distance` within `t`.
pub fn wrap_probability_bound(sigma2: f64, t: f64, distance: f64) -> f64 {
    4.0 * normal_cdf(-distance / (sigma2 * t).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coefficients::CoefficientRecipe;
    use crate::generators::fourier_slice;
    use crate::propagation::{euler_kernel, exact_kernel, EulerScheme};
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn smooth(level: u32) -> (SpatialGrid, CoefficientField) {
        let g = SpatialGrid::new(level, 1.0).unwrap();
        let f = CoefficientRecipe::smooth().sample(&g).unwrap();
        (g, f)
    }

    fn courant_dt(g: &SpatialGrid, f: &CoefficientField) -> f64 {
        let h = g.step();
        0.9 * h * h / f.sigma2().iter().cloned().fold(0.0, f64::max)
    }

    #[test]
    fn single_step_reads_the_transfer_row() {
        let (g, f) = smooth(2);
        let dt = courant_dt(&g, &f);
        let x0 = g.point(3);
        let e = enumerate_euler_paths(&g, &f, dt, 1, x0).unwrap();
        let (up, down) = f.rates(3);
        let h = g.step();
        let a = f.a()[3];
        let find = |site: usize, j: u32| {
            e.outcomes()
                .iter()
                .find(|o| o.terminal == site && o.drift_events == j)
                .copied()
                .unwrap()
        };
        let o_up = find(4, 0);
        assert_eq!((o_up.y, o_up.weight), (a * h, dt * up));
        let o_down = find(2, 0);
        assert_eq!((o_down.y, o_down.weight), (-a * h, dt * down));
        assert_eq!(find(3, 0).weight, 1.0 - dt * f.sigma2()[3] / (h * h));
        assert_eq!(find(3, 1).weight, dt * f.b()[3]);
        assert_eq!(e.outcomes().len(), 4);
    }

    #[test]
    fn no_integral_gives_point_mass_at_zero() {
        let g = SpatialGrid::new(2, 1.0).unwrap();
        let f = CoefficientRecipe {
            a: crate::coefficients::Profile::constant(0.0),
            b: crate::coefficients::Profile::constant(0.0),
            ..CoefficientRecipe::smooth()
        }
        .sample(&g)
        .unwrap();
        let dt = courant_dt(&g, &f);
        let e = enumerate_euler_paths(&g, &f, dt, 5, 0.0).unwrap();
        assert!(e.outcomes().iter().all(|o| o.y == 0.0 && o.drift_events == 0));
        assert_eq!(e.outcomes().len(), g.len());
        let slice = fourier_slice(&g, &f, c(0.0, 0.0)).unwrap();
        let k = euler_kernel(&slice, 5.0 * dt, &EulerScheme::new(5.0 * dt, dt, 1.0).unwrap()).unwrap();
        let row = g.index_of(0.0).unwrap();
        for (site, m) in e.marginal().iter().enumerate() {
            assert!((m - k.entries()[[row, site]].re * g.step()).abs() < 1e-14);
        }
    }

    #[test]
    fn matches_the_euler_slice() {
        let (g, f) = smooth(2);
        let dt = courant_dt(&g, &f);
        let steps = 6;
        let scheme = EulerScheme::new(steps as f64 * dt, dt, 1.0).unwrap();
        for start in [0, 3, 6] {
            let e = enumerate_euler_paths(&g, &f, dt, steps, g.point(start)).unwrap();
            for z in [c(0.0, 0.0), c(1.0, 0.0), c(2.5, 0.0), c(0.0, 1.0), c(-0.7, 0.4)] {
                let slice = fourier_slice(&g, &f, z).unwrap();
                let k = euler_kernel(&slice, steps as f64 * dt, &scheme).unwrap();
                let row = e.characteristic(z);
                for (site, v) in row.iter().enumerate() {
                    let want = k.entries()[[start, site]] * g.step();
                    assert!(
                        (v - want).norm() <= 1e-12,
                        "z={z} start={start} site={site}: {v} vs {want}"
                    );
                }
            }
        }
    }

    #[test]
    fn guards() {
        let (g, f) = smooth(2);
        let dt = courant_dt(&g, &f);
        assert!(matches!(
            enumerate_euler_paths(&g, &f, dt, 8, 0.0),
            Err(Error::WorkGuard(_))
        ));
        assert!(matches!(
            enumerate_euler_paths(&g, &f, 10.0 * dt, 2, 0.0),
            Err(Error::Courant { .. })
        ));
        assert!(enumerate_euler_paths(&g, &f, dt, 2, 0.1).is_err());
    }

    #[test]
    fn csv_export() {
        let (g, f) = smooth(1);
        let e = enumerate_euler_paths(&g, &f, courant_dt(&g, &f), 2, 0.0).unwrap();
        let mut buf = Vec::new();
        e.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), e.outcomes().len() + 1);
        assert!(text.starts_with("x',y,drift_events,weight\n"));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn mass_is_conserved(steps in 1u32..7, frac in 0.05f64..1.0, start in 0usize..8) {
            let (g, f) = smooth(2);
            let dt = frac * courant_dt(&g, &f) / 0.9;
            let e = enumerate_euler_paths(&g, &f, dt, steps, g.point(start)).unwrap();
            prop_assert!((e.total_mass() - 1.0).abs() <= 1e-13);
            prop_assert!(e.min_weight() >= 0.0);
        }
    }

    #[test]
    fn heat_kernel_properties() {
        let k = |x: f64, y: f64| periodic_heat_kernel(0.7, 0.4, x, y, 2.0, 6).unwrap();
        assert!((k(0.3, -1.1) - k(-1.1, 0.3)).abs() < 1e-16);
        // trapezoid on a periodic smooth function is spectrally accurate
        let n = 400;
        let dx = 4.0 / n as f64;
        let total: f64 = (0..n).map(|j| k(0.5, -2.0 + j as f64 * dx) * dx).sum();
        assert!((total - 1.0).abs() < 1e-10, "{total}");
        assert!(periodic_heat_kernel(1.0, 0.1, 0.0, 0.0, 1.0, 2).is_err());
    }

    #[test]
    fn lattice_heat_kernel_matches_images() {
        let g = SpatialGrid::new(7, 4.0).unwrap();
        let f = CoefficientField::constant(&g, 1.0, 0.0, 0.0, 0.0).unwrap();
        let k = exact_kernel(&fourier_slice(&g, &f, c(0.0, 0.0)).unwrap(), 0.25).unwrap();
        let row = g.index_of(0.0).unwrap();
        let mut worst = 0.0f64;
        for site in 0..g.len() {
            let want = periodic_heat_kernel(1.0, 0.25, 0.0, g.point(site), 4.0, 5).unwrap();
            worst = worst.max((k.entries()[[row, site]].re - want).abs());
        }
        assert!(worst <= 2e-3, "{worst}");
    }

    #[test]
    fn sup_density_support_and_mass() {
        assert_eq!(bm_sup_density(1.0, 0.5, 0.3), 0.0);
        assert_eq!(bm_sup_density(1.0, -0.5, -0.1), 0.0);
        let t: f64 = 0.25;
        let s = t.sqrt();
        // composite Simpson over x in [-8s, 8s] split at 0, y in [max(0, x), 8s]
        let simpson = |f: &dyn Fn(f64) -> f64, lo: f64, hi: f64, n: usize| {
            let dx = (hi - lo) / n as f64;
            let mut acc = f(lo) + f(hi);
            for k in 1..n {
                acc += f(lo + k as f64 * dx) * if k % 2 == 1 { 4.0 } else { 2.0 };
            }
            acc * dx / 3.0
        };
        let inner = |x: f64| simpson(&|y| bm_sup_density(t, x, y), x.max(0.0), 8.0 * s, 800);
        let total = simpson(&inner, -8.0 * s, 0.0, 800) + simpson(&inner, 0.0, 8.0 * s, 800);
        assert!((total - 1.0).abs() < 1e-6, "{total}");
        let cdf_total = bm_sup_cell_mass(t, (-10.0, 10.0), (0.0, 10.0));
        assert!((cdf_total - 1.0).abs() < 1e-14);
    }

    #[test]
    fn cell_mass_matches_density() {
        let t = 0.3;
        let (x1, x2, y1, y2) = (-0.2, 0.1, 0.15, 0.4);
        let n = 200;
        let (dx, dy) = ((x2 - x1) / n as f64, (y2 - y1) / n as f64);
        let mut mid = 0.0;
        for i in 0..n {
            for j in 0..n {
                mid += bm_sup_density(t, x1 + (i as f64 + 0.5) * dx, y1 + (j as f64 + 0.5) * dy) * dx * dy;
            }
        }
        let exact = bm_sup_cell_mass(t, (x1, x2), (y1, y2));
        assert!((mid - exact).abs() < 1e-6, "{mid} vs {exact}");
    }

    #[test]
    fn char_examples() {
        let plain = constant_coeff_char(0.8, 0.3, 1.2, 0.1, 0.0, 0.4, 0.2, -0.3);
        assert_eq!(plain, c(gaussian(-0.5 - 0.04, 0.48), 0.0));
        for p in [-2.0, 0.5, 3.0] {
            assert_eq!(constant_coeff_char(0.0, 0.0, 1.2, 0.1, p, 0.4, 0.2, -0.3), plain);
        }
    }

    fn char_error(level: u32) -> f64 {
        let g = SpatialGrid::new(level, 4.0).unwrap();
        let f = CoefficientField::constant(&g, 1.0, 0.0, 1.0, 0.5).unwrap();
        let t = 0.05;
        let k = exact_kernel(&fourier_slice(&g, &f, c(1.0, 0.0)).unwrap(), t).unwrap();
        let row = g.index_of(0.0).unwrap();
        assert!(wrap_probability_bound(1.0, t, 4.0) < 1e-8);
        let mut num = 0.0f64;
        let mut den = 0.0f64;
        for site in 0..g.len() {
            let want = constant_coeff_char(1.0, 0.5, 1.0, 0.0, 1.0, t, 0.0, g.point(site));
            num = num.max((k.entries()[[row, site]] - want).norm());
            den = den.max(want.norm());
        }
        num / den
    }

    #[test]
    fn lattice_slice_matches_constant_coefficient_char() {
        // the lattice fourth cumulant gives a relative error near h^2/(8 sigma^2 t)
        let e7 = char_error(7);
        assert!(e7 < 3e-3, "{e7}");
        let e8 = char_error(8);
        assert!(e8 < 1e-3, "{e8}");
        assert!((e7 / e8 - 4.0).abs() < 0.2, "{e7} {e8}");
    }
}
