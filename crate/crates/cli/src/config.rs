use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

use abelkern_core::coefficients::{CoefficientRecipe, Profile};
use abelkern_core::propagation::{Method, DEFAULT_SAFETY};
use abelkern_core::{Complex64, FrequencyGrid, SpatialGrid};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JobKind {
    Kernel,
    Sup,
    Dsum,
    Convergence,
    Validate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub job: JobKind,
    #[serde(default = "default_output")]
    pub output: PathBuf,
    #[serde(default)]
    pub t: f64,
    pub grid: GridConfig,
    #[serde(default)]
    pub coefficients: CoefficientConfig,
    pub frequencies: Option<FrequencyConfig>,
    #[serde(default)]
    pub method: MethodConfig,
    pub density: Option<DensityConfig>,
    pub sup: Option<SupConfig>,
    pub dsum: Option<DsumConfig>,
    pub convergence: Option<ConvergenceConfig>,
    #[serde(default)]
    pub tolerances: Tolerances,
}

fn default_output() -> PathBuf {
    PathBuf::from("abelkern-out")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub half_width: f64,
    pub levels: Vec<u32>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    #[default]
    Smooth,
    Custom,
    Table,
}

/// `family = "smooth"` uses the built-in smooth family; `"custom"` takes
/// profiles for `sigma2`, `mu`, `a`, `b`; `"table"` reads a CSV with columns
/// `x, sigma2, mu, a, b` on the grid of some level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct CoefficientConfig {
    #[serde(default)]
    pub family: Family,
    pub sigma2: Option<Profile>,
    pub mu: Option<Profile>,
    pub a: Option<Profile>,
    pub b: Option<Profile>,
    pub table: Option<PathBuf>,
    pub sigma2_floor: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "layout", rename_all = "snake_case", deny_unknown_fields)]
pub enum FrequencyConfig {
    Window {
        half_width: f64,
        count: usize,
    },
    InverseLattice {
        level: u32,
        half_width: f64,
    },
    /// `z = [[re, im], ...]`.
    Explicit {
        z: Vec<[f64; 2]>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MethodConfig {
    #[default]
    Exact,
    Euler {
        #[serde(default = "default_safety")]
        safety: f64,
        dt: Option<f64>,
    },
}

fn default_safety() -> f64 {
    DEFAULT_SAFETY
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DensityConfig {
    /// Offsets `dy`; defaults to the lattice dual to the frequencies.
    pub offsets: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SupConfig {
    #[serde(default)]
    pub x0: f64,
    /// Compare with the Brownian reflection law; needs constant `sigma2`.
    #[serde(default)]
    pub reflection: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PsiKind {
    Zero,
    /// `psi(x1, x2) = x2 - x1`.
    Increment,
    /// `psi(x1, x2) = x2`.
    Terminal,
    Table,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DsumConfig {
    pub period: f64,
    pub periods: u32,
    pub psi: PsiKind,
    /// CSV with columns `x1, x2, value` when `psi = "table"`.
    pub psi_table: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Study {
    #[default]
    Kernel,
    EulerGap,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvergenceConfig {
    pub radius: f64,
    #[serde(default)]
    pub study: Study,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    pub oracle: f64,
    pub marginal: f64,
    pub stochastic: f64,
    pub gauge: f64,
    pub analyticity: f64,
    pub hermitian: f64,
    pub sup_lifted: f64,
    pub sup_marginal: f64,
    pub dsum: f64,
    pub rate_min: f64,
    pub rate_max: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            oracle: 1e-12,
            marginal: 1e-12,
            stochastic: 1e-12,
            gauge: 1e-13,
            analyticity: 1e-8,
            hermitian: 1e-12,
            sup_lifted: 1e-10,
            sup_marginal: 1e-11,
            dsum: 1e-12,
            rate_min: 1.7,
            rate_max: 2.3,
        }
    }
}

fn config_error(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| config_error(e.to_string()))
    }

    /// Reads `path`; relative paths inside the config resolve against its
    /// directory.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| config_error(format!("{}: {e}", path.display())))?;
        let mut cfg: Self = toml::from_str(&text).map_err(|e| config_error(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        let resolve = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        if let Some(t) = cfg.coefficients.table.as_mut() {
            resolve(t);
        }
        if let Some(d) = cfg.dsum.as_mut() {
            if let Some(p) = d.psi_table.as_mut() {
                resolve(p);
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.grid.levels.is_empty() {
            return Err(config_error("grid.levels: must not be empty"));
        }
        if self.grid.levels.windows(2).any(|w| w[1] <= w[0]) {
            return Err(config_error(format!(
                "grid.levels: must be increasing, got {:?}",
                self.grid.levels
            )));
        }
        if !(self.grid.half_width > 0.0 && self.grid.half_width.is_finite()) {
            return Err(config_error("grid.half_width: must be positive"));
        }
        if !(self.t >= 0.0 && self.t.is_finite()) {
            return Err(config_error(format!(
                "t: must be finite and non-negative, got {}",
                self.t
            )));
        }
        match self.coefficients.family {
            Family::Custom if self.coefficients.sigma2.is_none() || self.coefficients.mu.is_none() => {
                return Err(config_error("coefficients: custom family needs sigma2 and mu"));
            }
            Family::Table => match &self.coefficients.table {
                None => return Err(config_error("coefficients.table: required for the table family")),
                Some(p) if !p.is_file() => {
                    return Err(config_error(format!(
                        "coefficients.table: {} does not exist",
                        p.display()
                    )))
                }
                _ => {}
            },
            _ => {}
        }
        match self.job {
            JobKind::Kernel if self.frequencies.is_none() => {
                return Err(config_error("kernel job needs a [frequencies] section"));
            }
            JobKind::Dsum => {
                let d = self
                    .dsum
                    .as_ref()
                    .ok_or_else(|| config_error("dsum job needs a [dsum] section"))?;
                if self.frequencies.is_none() {
                    return Err(config_error("dsum job needs a [frequencies] section"));
                }
                if d.psi == PsiKind::Table {
                    match &d.psi_table {
                        None => return Err(config_error("dsum.psi_table: required when psi = \"table\"")),
                        Some(p) if !p.is_file() => {
                            return Err(config_error(format!("dsum.psi_table: {} does not exist", p.display())))
                        }
                        _ => {}
                    }
                }
            }
            JobKind::Convergence => {
                if self.convergence.is_none() {
                    return Err(config_error("convergence job needs a [convergence] section"));
                }
                if self.grid.levels.len() < 3 {
                    return Err(config_error("convergence job needs at least 3 levels"));
                }
                if self.grid.levels.windows(2).any(|w| w[1] != w[0] + 1) {
                    return Err(config_error("convergence job needs consecutive levels"));
                }
            }
            _ => {}
        }
        if let MethodConfig::Euler { safety, dt } = self.method {
            if !(safety > 0.0 && safety <= 1.0) {
                return Err(config_error(format!("method.safety: must lie in (0, 1], got {safety}")));
            }
            if let Some(dt) = dt {
                if !(dt > 0.0) {
                    return Err(config_error(format!("method.dt: must be positive, got {dt}")));
                }
            }
        }
        Ok(())
    }

    pub fn method(&self) -> Method {
        match self.method {
            MethodConfig::Exact => Method::Exact,
            MethodConfig::Euler { safety, dt } => Method::Euler { dt, safety },
        }
    }

    pub fn recipe(&self) -> Result<CoefficientRecipe, CliError> {
        let c = &self.coefficients;
        let mut recipe = match c.family {
            Family::Smooth => CoefficientRecipe::smooth(),
            Family::Custom => CoefficientRecipe {
                sigma2: c
                    .sigma2
                    .clone()
                    .ok_or_else(|| config_error("coefficients.sigma2 missing"))?,
                mu: c.mu.clone().ok_or_else(|| config_error("coefficients.mu missing"))?,
                a: c.a.clone().unwrap_or(Profile::constant(0.0)),
                b: c.b.clone().unwrap_or(Profile::constant(0.0)),
                sigma2_floor: None,
            },
            Family::Table => {
                let path = c
                    .table
                    .as_ref()
                    .ok_or_else(|| config_error("coefficients.table missing"))?;
                read_coefficient_table(path, self.grid.half_width)?
            }
        };
        if c.family != Family::Custom && (c.sigma2.is_some() || c.mu.is_some() || c.a.is_some() || c.b.is_some()) {
            return Err(config_error(
                "coefficients: profiles are only read for the custom family",
            ));
        }
        recipe.sigma2_floor = c.sigma2_floor;
        Ok(recipe)
    }

    pub fn frequency_grid(&self) -> Result<FrequencyGrid, CliError> {
        let f = self
            .frequencies
            .as_ref()
            .ok_or_else(|| config_error("[frequencies] section missing"))?;
        let grid = match f {
            FrequencyConfig::Window { half_width, count } => FrequencyGrid::window(*half_width, *count),
            FrequencyConfig::InverseLattice { level, half_width } => {
                FrequencyGrid::inverse_lattice(*level, *half_width)
            }
            FrequencyConfig::Explicit { z } => {
                FrequencyGrid::explicit(z.iter().map(|[re, im]| Complex64::new(*re, *im)).collect())
            }
        };
        grid.map_err(|e| config_error(format!("frequencies: {e}")))
    }
}

fn csv_rows(path: &Path, columns: usize) -> Result<Vec<Vec<f64>>, CliError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| config_error(format!("{}: {e}", path.display())))?;
    let mut rows = Vec::new();
    for (k, record) in reader.records().enumerate() {
        let record = record.map_err(|e| config_error(format!("{}: {e}", path.display())))?;
        if record.len() != columns {
            return Err(config_error(format!(
                "{}: line {} has {} fields, expected {columns}",
                path.display(),
                k + 2,
                record.len()
            )));
        }
        let row = record
            .iter()
            .map(|v| {
                v.parse::<f64>()
                    .map_err(|e| config_error(format!("{}: line {}: `{v}`: {e}", path.display(), k + 2)))
            })
            .collect::<Result<Vec<_>, _>>()?;
        rows.push(row);
    }
    Ok(rows)
}

/// Tabulated recipe from rows `x, sigma2, mu, a, b` covering every point of
/// one grid level in order.
pub fn read_coefficient_table(path: &Path, half_width: f64) -> Result<CoefficientRecipe, CliError> {
    let rows = csv_rows(path, 5)?;
    let n = rows.len();
    if n < 2 || !n.is_power_of_two() {
        return Err(config_error(format!("{}: need 2^(m+1) rows, got {n}", path.display())));
    }
    let level = n.trailing_zeros() - 1;
    let grid = SpatialGrid::new(level, half_width).map_err(|e| config_error(e.to_string()))?;
    for (k, row) in rows.iter().enumerate() {
        if grid.index_of(row[0]) != Some(k) {
            return Err(config_error(format!(
                "{}: line {}: x = {} is not grid point {k} of level {level}",
                path.display(),
                k + 2,
                row[0]
            )));
        }
    }
    let column = |c: usize| Profile::Tabulated {
        level,
        values: rows.iter().map(|r| r[c]).collect(),
    };
    Ok(CoefficientRecipe {
        sigma2: column(1),
        mu: column(2),
        a: column(3),
        b: column(4),
        sigma2_floor: None,
    })
}

/// Rows `x1, x2, value` of a psi table.
pub fn read_psi_table(path: &Path) -> Result<Vec<(f64, f64, f64)>, CliError> {
    Ok(csv_rows(path, 3)?.into_iter().map(|r| (r[0], r[1], r[2])).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    const KERNEL: &str = r#"
job = "kernel"
t = 0.25

[grid]
half_width = 1.0
levels = [3]

[coefficients]
family = "custom"
sigma2 = { kind = "constant", value = 1.0 }
mu = { kind = "constant", value = 0.0 }
a = { kind = "sinusoid", amplitude = 0.5 }

[frequencies]
layout = "window"
half_width = 2.0
count = 5
"#;

    #[test]
    fn parses_custom_profiles() {
        let cfg = RunConfig::from_toml(KERNEL).unwrap();
        assert_eq!(cfg.job, JobKind::Kernel);
        assert_eq!(cfg.method, MethodConfig::Exact);
        assert_eq!(cfg.output, PathBuf::from("abelkern-out"));
        let r = cfg.recipe().unwrap();
        assert_eq!(r.sigma2, Profile::Constant { value: 1.0 });
        assert_eq!(r.b, Profile::Constant { value: 0.0 });
        let text = KERNEL.replace("mu = { kind = \"constant\", value = 0.0 }\n", "");
        assert!(RunConfig::from_toml(&text).unwrap().recipe().is_err());
        assert_eq!(cfg.frequency_grid().unwrap().len(), 5);
    }

    #[test]
    fn rejects_unknown_fields() {
        let text = KERNEL.replace("t = 0.25", "t = 0.25\nsteps = 3");
        assert!(matches!(RunConfig::from_toml(&text), Err(CliError::Config(_))));
    }

    #[test]
    fn rejects_bad_levels_and_time() {
        let text = KERNEL.replace("levels = [3]", "levels = [4, 4]");
        assert!(RunConfig::from_toml(&text).unwrap().validate().is_err());
        let text = KERNEL.replace("t = 0.25", "t = -1.0");
        assert!(RunConfig::from_toml(&text).unwrap().validate().is_err());
        assert!(RunConfig::from_toml(KERNEL).unwrap().validate().is_ok());
    }

    #[test]
    fn euler_defaults_safety() {
        let text = format!("{KERNEL}\n[method]\nkind = \"euler\"\n");
        let cfg = RunConfig::from_toml(&text).unwrap();
        assert_eq!(
            cfg.method,
            MethodConfig::Euler {
                safety: DEFAULT_SAFETY,
                dt: None
            }
        );
    }

    #[test]
    fn coefficient_table_must_cover_grid() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("coef.csv");
        let g = SpatialGrid::new(1, 1.0).unwrap();
        let mut text = String::from("x,sigma2,mu,a,b\n");
        for k in 0..g.len() {
            text.push_str(&format!("{},1.0,0.0,0.5,0.0\n", g.point(k)));
        }
        std::fs::write(&path, &text).unwrap();
        let r = read_coefficient_table(&path, 1.0).unwrap();
        assert_eq!(
            r.a,
            Profile::Tabulated {
                level: 1,
                values: vec![0.5; 4]
            }
        );
        std::fs::write(&path, text.replace("-0.5,", "-0.4,")).unwrap();
        assert!(read_coefficient_table(&path, 1.0).is_err());
    }
}
