//! Default invariant suite, small enough to run in CI on every commit.

use ndarray::Array2;
use serde::Serialize;

use abelkern_core::abelian_ext::{dsum_power, lifted_index, lifted_sup_generator, sup_joint_kernel};
use abelkern_core::analysis::analyticity_residual;
use abelkern_core::generators::{fourier_slice, gauge_diagonal, ito_slice, relative_distance, undo_gauge};
use abelkern_core::linalg::{expm, max_abs, max_abs_diff, to_complex, CMatrix};
use abelkern_core::oracles::enumerate_euler_paths;
use abelkern_core::propagation::{
    courant_max_step, diffusion_kernel, euler_kernel, exact_kernel, joint_kernel, EulerScheme, Method,
};
use abelkern_core::{CoefficientField, CoefficientRecipe, Complex64, FrequencyGrid, SpatialGrid};

use crate::config::{GridConfig, JobKind, Tolerances};
use crate::{finish, Artifacts, CliError, Outcome, RunConfig};

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub value: f64,
    pub tolerance: f64,
    pub passed: bool,
}

fn check(name: &'static str, value: f64, tolerance: f64) -> Check {
    Check {
        name,
        value,
        tolerance,
        passed: value <= tolerance,
    }
}

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn smooth(level: u32) -> Result<(SpatialGrid, CoefficientField), CliError> {
    let g = SpatialGrid::new(level, 1.0)?;
    let f = CoefficientRecipe::smooth().sample(&g)?;
    Ok((g, f))
}

/// Deterministic points in `|z| <= radius`.
fn disc_points(count: usize, radius: f64) -> Vec<Complex64> {
    let mut s: u64 = 0x9e3779b97f4a7c15;
    let mut next = move || {
        s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        (s >> 11) as f64 / (1u64 << 53) as f64
    };
    (0..count)
        .map(|_| Complex64::from_polar(radius * next().sqrt(), 2.0 * std::f64::consts::PI * next()))
        .collect()
}

fn oracle_equivalence() -> Result<f64, CliError> {
    let (g, f) = smooth(2)?;
    let zs = [c(0.0, 0.0), c(1.0, 0.0), c(2.5, 0.0), c(0.0, 1.0)];
    let slices = zs
        .iter()
        .map(|&z| fourier_slice(&g, &f, z))
        .collect::<Result<Vec<_>, _>>()?;
    let dt = courant_max_step(&slices, 0.9)?.value().unwrap_or(0.01);
    let steps = 6u32;
    let scheme = EulerScheme::new(steps as f64 * dt, dt, 1.0)?;
    let mut worst = 0.0f64;
    for start in 0..g.len() {
        let e = enumerate_euler_paths(&g, &f, dt, steps, g.point(start))?;
        for s in &slices {
            let k = euler_kernel(s, steps as f64 * dt, &scheme)?;
            for (site, v) in e.characteristic(s.z()).iter().enumerate() {
                worst = worst.max((v - k.entries()[[start, site]] * g.step()).norm());
            }
        }
    }
    Ok(worst)
}

fn marginal_preservation() -> Result<f64, CliError> {
    let mut worst = 0.0f64;
    let freqs = FrequencyGrid::from_real(&[-2.0, 0.0, 1.0])?;
    for recipe in [
        CoefficientRecipe::smooth(),
        CoefficientRecipe::constant(0.8, 0.3, 1.0, -0.5),
    ] {
        let g = SpatialGrid::new(3, 1.0)?;
        let f = recipe.sample(&g)?;
        for method in [Method::Exact, Method::euler_auto()] {
            let ft = joint_kernel(&g, &f, 0.3, &freqs, method)?;
            let bare = diffusion_kernel(&g, &f, 0.3, ft.scheme())?;
            let zero = ft
                .slice_at(c(0.0, 0.0))
                .ok_or_else(|| CliError::Validation("missing p = 0".into()))?;
            worst = worst.max(max_abs_diff(zero.entries(), bare.entries()));
        }
    }
    Ok(worst)
}

fn stochasticity() -> Result<(f64, f64), CliError> {
    let (g, f) = smooth(4)?;
    let s = fourier_slice(&g, &f, c(0.0, 0.0))?;
    let mut rows = 0.0f64;
    let mut neg = 0.0f64;
    for t in [0.1, 0.5, 2.0] {
        let (r, m) = exact_kernel(&s, t)?.stochastic_defect();
        rows = rows.max(r);
        neg = neg.max(-m);
    }
    Ok((rows, neg.max(0.0)))
}

fn gauge_identity() -> Result<f64, CliError> {
    let (g, f) = smooth(4)?;
    let mut worst = 0.0f64;
    for z in disc_points(10, 2.0) {
        let ito = ito_slice(&g, &f, z)?;
        let d = gauge_diagonal(&g, &f, z)?;
        let back = undo_gauge(ito.entries(), &d);
        worst = worst.max(relative_distance(&back, fourier_slice(&g, &f, z)?.entries()));
    }
    Ok(worst)
}

fn analyticity() -> Result<f64, CliError> {
    let (g, f) = smooth(3)?;
    let mut worst = 0.0f64;
    for (a, b) in [(3usize, 5usize), (0, 0), (7, 12)] {
        let entry = |z: Complex64| -> abelkern_core::Result<Complex64> {
            Ok(exact_kernel(&fourier_slice(&g, &f, z)?, 0.25)?.entries()[[a, b]])
        };
        worst = worst.max(analyticity_residual(entry, c(0.0, 0.0), 1.0, 64)?);
    }
    Ok(worst)
}

fn hermitian() -> Result<f64, CliError> {
    let (g, f) = smooth(3)?;
    let freqs = FrequencyGrid::window(3.0, 7)?;
    let ft = joint_kernel(&g, &f, 0.2, &freqs, Method::Exact)?;
    Ok(ft.hermitian_defect())
}

fn sup_checks() -> Result<(f64, f64), CliError> {
    let g = SpatialGrid::new(2, 1.0)?;
    let f = CoefficientField::constant(&g, 1.0, 0.0, 0.0, 0.0)?;
    let (t, start) = (0.25, 3usize);
    let k = sup_joint_kernel(&g, &f, t, g.point(start))?;
    let n = g.len();
    let e = expm(&(to_complex(&lifted_sup_generator(&g, &f)?) * c(t, 0.0)));
    let mut lifted = 0.0f64;
    for xp in 0..n {
        for yp in 0..n {
            let want = e[[lifted_index(n, start, start), lifted_index(n, xp, yp)]].re;
            lifted = lifted.max((k.values()[[xp, yp]] * g.step() - want).abs());
        }
    }
    let (g, f) = smooth(4)?;
    let k = sup_joint_kernel(&g, &f, 0.3, g.point(9))?;
    let full = exact_kernel(&fourier_slice(&g, &f, c(0.0, 0.0))?, 0.3)?;
    let marginal = k
        .marginal()
        .iter()
        .enumerate()
        .map(|(xp, m)| (m - full.entries()[[9, xp]].re).abs())
        .fold(0.0, f64::max);
    Ok((lifted, marginal.max(k.support_violation())))
}

fn dsum_checks() -> Result<(f64, f64), CliError> {
    let n = 6;
    let mut s: u64 = 17;
    let mut next = move || {
        s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        (s >> 11) as f64 / (1u64 << 53) as f64
    };
    let mut u = Array2::from_shape_fn((n, n), |_| next() + 0.05);
    for mut row in u.rows_mut() {
        let total = row.sum();
        row.mapv_inplace(|v| v / total);
    }
    let u = to_complex(&u);
    let psi = Array2::from_shape_fn((n, n), |_| 2.0 * next() - 1.0);
    let mut chain = 0.0f64;
    for p in [c(0.7, 0.0), c(-1.9, 0.3)] {
        let got = dsum_power(&u, &psi, p, 3)?;
        let mut want = CMatrix::zeros((n, n));
        for x0 in 0..n {
            for x1 in 0..n {
                for x2 in 0..n {
                    for x3 in 0..n {
                        let phase = psi[[x0, x1]] + psi[[x1, x2]] + psi[[x2, x3]];
                        want[[x0, x3]] += u[[x0, x1]] * u[[x1, x2]] * u[[x2, x3]] * (-Complex64::i() * p * phase).exp();
                    }
                }
            }
        }
        chain = chain.max(max_abs_diff(&got, &want));
    }
    let flat = Array2::zeros((n, n));
    let base = dsum_power(&u, &flat, c(0.0, 0.0), 3)?;
    let spread = [c(1.0, 0.0), c(4.0, -2.0)]
        .iter()
        .map(|&p| dsum_power(&u, &flat, p, 3).map(|m| max_abs_diff(&m, &base)))
        .collect::<Result<Vec<_>, _>>()?
        .into_iter()
        .fold(0.0, f64::max);
    Ok((chain, spread / max_abs(&base)))
}

/// Runs every check of the default suite.
pub fn suite(tol: &Tolerances) -> Result<Vec<Check>, CliError> {
    let (rows, neg) = stochasticity()?;
    let (lifted, sup_marginal) = sup_checks()?;
    let (chain, spread) = dsum_checks()?;
    Ok(vec![
        check("oracle_equivalence", oracle_equivalence()?, tol.oracle),
        check("marginal_preservation", marginal_preservation()?, tol.marginal),
        check("stochastic_row_sums", rows, tol.stochastic),
        check("stochastic_min_entry", neg, tol.stochastic),
        check("gauge_identity", gauge_identity()?, tol.gauge),
        check("analyticity_mean_value", analyticity()?, tol.analyticity),
        check("hermitian_symmetry", hermitian()?, tol.hermitian),
        check("sup_lifted_generator", lifted, tol.sup_lifted),
        check("sup_marginal_and_support", sup_marginal, tol.sup_marginal),
        check("dsum_chain_enumeration", chain, tol.dsum),
        check("dsum_zero_psi_p_independence", spread, 0.0),
    ])
}

#[derive(Debug, Serialize)]
struct Summary {
    passed: bool,
    checks: Vec<Check>,
}

pub fn job(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let checks = suite(&cfg.tolerances)?;
    let failed: Vec<&str> = checks.iter().filter(|c| !c.passed).map(|c| c.name).collect();
    let passed = failed.is_empty();
    let summary = Summary { passed, checks };
    let mut artifacts = Artifacts::default();
    let mut json = serde_json::to_vec_pretty(&summary).map_err(|e| CliError::Config(e.to_string()))?;
    json.push(b'\n');
    artifacts.add("validate.json", json);
    let text = if passed {
        format!("all {} checks passed", summary.checks.len())
    } else {
        format!("failed checks: {}", failed.join(", "))
    };
    finish(cfg, artifacts, summary, passed, text)
}

/// Configuration used by the bare `validate` subcommand.
pub fn default_config(output: std::path::PathBuf) -> RunConfig {
    RunConfig {
        job: JobKind::Validate,
        output,
        t: 0.0,
        grid: GridConfig {
            half_width: 1.0,
            levels: vec![2],
        },
        coefficients: Default::default(),
        frequencies: None,
        method: Default::default(),
        density: None,
        sup: None,
        dsum: None,
        convergence: None,
        tolerances: Tolerances::default(),
    }
}
