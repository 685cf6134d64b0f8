use serde::Serialize;
use std::fmt::Write as _;

use abelkern_core::abelian_ext::{dsum_kernel, sup_joint_kernel, DiscreteSumSpec};
use abelkern_core::analysis::{
    euler_gap_study, graph_norm_family, kernel_convergence_study, uniform_norm_family, ConvergenceReport,
    GraphNormReport, StudyMethod,
};
use abelkern_core::coefficients::Profile;
use abelkern_core::generators::{diffusion_generator, fourier_slice, min_refinement_level, MAX_SEARCH_LEVEL};
use abelkern_core::propagation::{
    courant_max_step, dual_offsets, exact_kernel, joint_kernel, reconstruct_joint_density, CourantBound, EulerScheme,
    JointDensity, JointKernelFT,
};
use abelkern_core::{CoefficientField, CoefficientRecipe, Complex64, FrequencyGrid, SpatialGrid};

use crate::config::{PsiKind, Study};
use crate::{finish, Artifacts, CliError, Outcome, RunConfig};

pub(crate) fn num(v: f64) -> String {
    if v == 0.0 {
        // drop the sign of negative zero so reruns stay byte-stable
        return "0".into();
    }
    ryu::Buffer::new().format(v).to_string()
}

fn has_complex(freqs: &FrequencyGrid) -> bool {
    freqs.frequencies().iter().any(|z| z.im != 0.0)
}

/// Columns `x, x', p_or_dy, re, im` (plus `p_im` after `p_or_dy` when a
/// frequency is complex); `x`-major, then `x'`, then frequency.
pub fn kernel_csv(ft: &JointKernelFT) -> Vec<u8> {
    let grid = ft.grid();
    let complex = has_complex(ft.frequencies());
    let mut out = String::new();
    out.push_str(if complex {
        "x,x',p_or_dy,p_im,re,im\n"
    } else {
        "x,x',p_or_dy,re,im\n"
    });
    let n = grid.len();
    for a in 0..n {
        for b in 0..n {
            for s in ft.slices() {
                let v = s.entries()[[a, b]];
                let z = s.z();
                let _ = if complex {
                    writeln!(
                        out,
                        "{},{},{},{},{},{}",
                        num(grid.point(a)),
                        num(grid.point(b)),
                        num(z.re),
                        num(z.im),
                        num(v.re),
                        num(v.im)
                    )
                } else {
                    writeln!(
                        out,
                        "{},{},{},{},{}",
                        num(grid.point(a)),
                        num(grid.point(b)),
                        num(z.re),
                        num(v.re),
                        num(v.im)
                    )
                };
            }
        }
    }
    out.into_bytes()
}

/// Same columns as [`kernel_csv`] with `p_or_dy` the offset and `im = 0`.
pub fn density_csv(d: &JointDensity) -> Vec<u8> {
    let grid = d.grid();
    let mut out = String::from("x,x',p_or_dy,re,im\n");
    let n = grid.len();
    for a in 0..n {
        for b in 0..n {
            for (k, dy) in d.offsets().iter().enumerate() {
                let _ = writeln!(
                    out,
                    "{},{},{},{},0",
                    num(grid.point(a)),
                    num(grid.point(b)),
                    num(*dy),
                    num(d.values()[[a, b, k]])
                );
            }
        }
    }
    out.into_bytes()
}

fn level_setup(
    cfg: &RunConfig,
    recipe: &CoefficientRecipe,
    level: u32,
) -> Result<(SpatialGrid, CoefficientField), CliError> {
    let grid = SpatialGrid::new(level, cfg.grid.half_width)?;
    let field = recipe.sample(&grid)?;
    Ok((grid, field))
}

fn threshold(recipe: &CoefficientRecipe, half_width: f64) -> Option<u32> {
    min_refinement_level(recipe, half_width, MAX_SEARCH_LEVEL).ok()
}

#[derive(Debug, Serialize)]
struct SchemeInfo {
    dt: f64,
    steps: u64,
    safety: f64,
}

fn scheme_info(s: Option<&EulerScheme>) -> Option<SchemeInfo> {
    s.map(|s| SchemeInfo {
        dt: s.dt(),
        steps: s.steps(),
        safety: s.safety(),
    })
}

#[derive(Debug, Serialize)]
struct KernelLevel {
    level: u32,
    points: usize,
    h: f64,
    min_refinement_level: Option<u32>,
    courant_bound: CourantBound,
    scheme: Option<SchemeInfo>,
    uniform_norm: f64,
    graph_norm: GraphNormReport,
    hermitian_defect: f64,
    stochastic_defect: Option<(f64, f64)>,
    density_imaginary_residual: Option<f64>,
    kernel_csv: String,
    density_csv: Option<String>,
}

fn family_norms(ft: &JointKernelFT, field: &CoefficientField) -> Result<(f64, GraphNormReport), CliError> {
    let gen = diffusion_generator(ft.grid(), field)?;
    let entries: Vec<_> = ft.slices().iter().map(|s| s.entries().clone()).collect();
    let uniform = uniform_norm_family(&entries)?;
    let graph = graph_norm_family(&entries, &gen, Some(ft.frequencies().radius()))?;
    Ok((uniform, graph))
}

pub fn kernel(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let recipe = cfg.recipe()?;
    let freqs = cfg.frequency_grid()?;
    let m0 = threshold(&recipe, cfg.grid.half_width);
    let mut artifacts = Artifacts::default();
    let mut levels = Vec::new();
    for &level in &cfg.grid.levels {
        let (grid, field) = level_setup(cfg, &recipe, level)?;
        let slices = freqs
            .frequencies()
            .iter()
            .map(|&z| fourier_slice(&grid, &field, z))
            .collect::<Result<Vec<_>, _>>()?;
        let courant = courant_max_step(&slices, 1.0)?;
        let ft = joint_kernel(&grid, &field, cfg.t, &freqs, cfg.method())?;
        let (uniform, graph) = family_norms(&ft, &field)?;
        let name = format!("kernel_m{level}.csv");
        artifacts.add(name.clone(), kernel_csv(&ft));
        let (residual, density_name) = match &cfg.density {
            Some(d) => {
                let offsets = match &d.offsets {
                    Some(o) => o.clone(),
                    None => dual_offsets(&freqs)?,
                };
                let dens = reconstruct_joint_density(&ft, &offsets)?;
                let dname = format!("density_m{level}.csv");
                artifacts.add(dname.clone(), density_csv(&dens));
                (Some(dens.max_imaginary_residual()), Some(dname))
            }
            None => (None, None),
        };
        levels.push(KernelLevel {
            level,
            points: grid.len(),
            h: grid.step(),
            min_refinement_level: m0,
            courant_bound: courant,
            scheme: scheme_info(ft.scheme()),
            uniform_norm: uniform,
            graph_norm: graph,
            hermitian_defect: ft.hermitian_defect(),
            stochastic_defect: ft.slice_at(Complex64::new(0.0, 0.0)).map(|s| s.stochastic_defect()),
            density_imaginary_residual: residual,
            kernel_csv: name,
            density_csv: density_name,
        });
    }
    let summary = format!("kernel job over levels {:?}", cfg.grid.levels);
    finish(cfg, artifacts, levels, true, summary)
}

#[derive(Debug, Serialize)]
struct SupLevel {
    level: u32,
    points: usize,
    h: f64,
    x0: f64,
    marginal_defect: f64,
    support_violation: f64,
    reflection_l1: Option<f64>,
    csv: String,
}

pub fn sup(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let recipe = cfg.recipe()?;
    let sup_cfg = cfg.sup.clone().unwrap_or(crate::config::SupConfig {
        x0: 0.0,
        reflection: false,
    });
    let reflection_sigma2 = if sup_cfg.reflection {
        match (&recipe.sigma2, recipe.mu.is_zero()) {
            (Profile::Constant { value }, true) => Some(*value),
            _ => {
                return Err(CliError::Config(
                    "sup.reflection needs constant sigma2 and zero mu".into(),
                ))
            }
        }
    } else {
        None
    };
    let mut artifacts = Artifacts::default();
    let mut levels = Vec::new();
    for &level in &cfg.grid.levels {
        let (grid, field) = level_setup(cfg, &recipe, level)?;
        let k = sup_joint_kernel(&grid, &field, cfg.t, sup_cfg.x0)?;
        let full = exact_kernel(&fourier_slice(&grid, &field, Complex64::new(0.0, 0.0))?, cfg.t)?;
        let marginal_defect = k
            .marginal()
            .iter()
            .enumerate()
            .map(|(xp, m)| (m - full.entries()[[k.start(), xp]].re).abs())
            .fold(0.0, f64::max);
        let mut bytes = Vec::new();
        k.write_csv(&mut bytes).map_err(|e| CliError::Config(e.to_string()))?;
        let name = format!("sup_m{level}.csv");
        artifacts.add(name.clone(), rewrite_floats(&bytes));
        levels.push(SupLevel {
            level,
            points: grid.len(),
            h: grid.step(),
            x0: sup_cfg.x0,
            marginal_defect,
            support_violation: k.support_violation(),
            reflection_l1: reflection_sigma2.map(|s| k.reflection_l1(s)),
            csv: name,
        });
    }
    finish(cfg, artifacts, levels, true, "sup job".into())
}

/// Re-renders every float field of a CSV in the shared number format.
fn rewrite_floats(bytes: &[u8]) -> Vec<u8> {
    let text = String::from_utf8_lossy(bytes);
    let mut out = String::new();
    for (k, line) in text.lines().enumerate() {
        if k == 0 {
            out.push_str(line);
        } else {
            let fields: Vec<String> = line
                .split(',')
                .map(|f| f.parse::<f64>().map(num).unwrap_or_else(|_| f.to_string()))
                .collect();
            out.push_str(&fields.join(","));
        }
        out.push('\n');
    }
    out.into_bytes()
}

#[derive(Debug, Serialize)]
struct DsumLevel {
    level: u32,
    points: usize,
    h: f64,
    t: f64,
    scheme: Option<SchemeInfo>,
    hermitian_defect: f64,
    uniform_norm: f64,
    csv: String,
}

pub fn dsum(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let recipe = cfg.recipe()?;
    let freqs = cfg.frequency_grid()?;
    let d = cfg
        .dsum
        .as_ref()
        .ok_or_else(|| CliError::Config("[dsum] section missing".into()))?;
    let table = match (&d.psi, &d.psi_table) {
        (PsiKind::Table, Some(path)) => Some(crate::config::read_psi_table(path)?),
        (PsiKind::Table, None) => return Err(CliError::Config("dsum.psi_table missing".into())),
        _ => None,
    };
    let mut artifacts = Artifacts::default();
    let mut levels = Vec::new();
    for &level in &cfg.grid.levels {
        let (grid, field) = level_setup(cfg, &recipe, level)?;
        let spec = match d.psi {
            PsiKind::Zero => DiscreteSumSpec::zero(grid.len(), d.period, d.periods),
            PsiKind::Increment => DiscreteSumSpec::separable(grid.points(), d.period, d.periods),
            PsiKind::Terminal => DiscreteSumSpec::terminal_only(grid.points(), d.period, d.periods),
            PsiKind::Table => DiscreteSumSpec::from_table(&grid, table.as_deref().unwrap_or(&[]), d.period, d.periods),
        }
        .map_err(|e| CliError::Config(format!("dsum: {e}")))?;
        let ft = dsum_kernel(&grid, &field, &spec, &freqs, cfg.method())?;
        let entries: Vec<_> = ft.slices().iter().map(|s| s.entries().clone()).collect();
        let name = format!("dsum_m{level}.csv");
        artifacts.add(name.clone(), kernel_csv(&ft));
        levels.push(DsumLevel {
            level,
            points: grid.len(),
            h: grid.step(),
            t: ft.t(),
            scheme: scheme_info(ft.scheme()),
            hermitian_defect: ft.hermitian_defect(),
            uniform_norm: uniform_norm_family(&entries)?,
            csv: name,
        });
    }
    finish(cfg, artifacts, levels, true, "dsum job".into())
}

pub fn convergence_csv(r: &ConvergenceReport) -> Vec<u8> {
    let mut out = String::from("log_h,log_gap\n");
    for (lh, lg) in r.log_pairs() {
        let _ = writeln!(out, "{},{}", num(lh), num(lg));
    }
    out.into_bytes()
}

#[derive(Debug, Serialize)]
struct ConvergenceResults {
    report: ConvergenceReport,
    rate_band: (f64, f64),
    rate_in_band: bool,
}

pub fn convergence(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let recipe = cfg.recipe()?;
    let c = cfg
        .convergence
        .as_ref()
        .ok_or_else(|| CliError::Config("[convergence] section missing".into()))?;
    let report = match c.study {
        Study::Kernel => {
            let method = match cfg.method {
                crate::config::MethodConfig::Exact => StudyMethod::Exact,
                crate::config::MethodConfig::Euler { safety, .. } => StudyMethod::Euler { safety },
            };
            kernel_convergence_study(&recipe, cfg.grid.half_width, &cfg.grid.levels, cfg.t, c.radius, method)?
        }
        Study::EulerGap => {
            let safety = match cfg.method {
                crate::config::MethodConfig::Euler { safety, .. } => safety,
                crate::config::MethodConfig::Exact => abelkern_core::propagation::DEFAULT_SAFETY,
            };
            euler_gap_study(&recipe, cfg.grid.half_width, &cfg.grid.levels, cfg.t, c.radius, safety)?
        }
    };
    let mut artifacts = Artifacts::default();
    artifacts.add("convergence.csv", convergence_csv(&report));
    let band = (cfg.tolerances.rate_min, cfg.tolerances.rate_max);
    let in_band = report.fitted_rate >= band.0 && report.fitted_rate <= band.1;
    let summary = format!("fitted rate {}", report.fitted_rate);
    finish(
        cfg,
        artifacts,
        ConvergenceResults {
            report,
            rate_band: band,
            rate_in_band: in_band,
        },
        true,
        summary,
    )
}
