//! Coefficient recipes and their samples on a lattice.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::lattice::SpatialGrid;

/// A scalar profile `x -> value` on the periodic interval `[-L, L)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Profile {
    Constant {
        value: f64,
    },
    /// `intercept + slope * x`, clipped to `[min, max]` when given.
    Affine {
        intercept: f64,
        slope: f64,
        #[serde(default)]
        min: Option<f64>,
        #[serde(default)]
        max: Option<f64>,
    },
    /// `base + amplitude * sin(harmonic * pi * x / L + phase)`.
    Sinusoid {
        #[serde(default)]
        base: f64,
        amplitude: f64,
        #[serde(default = "one")]
        harmonic: f64,
        #[serde(default)]
        phase: f64,
    },
    /// Samples at the points of a grid of the given level, linearly
    /// interpolated (periodically) everywhere else.
    Tabulated {
        level: u32,
        values: Vec<f64>,
    },
}

fn one() -> f64 {
    1.0
}

impl Profile {
    pub fn constant(value: f64) -> Self {
        Profile::Constant { value }
    }

    pub fn sine(base: f64, amplitude: f64) -> Self {
        Profile::Sinusoid {
            base,
            amplitude,
            harmonic: 1.0,
            phase: 0.0,
        }
    }

    pub fn cosine(base: f64, amplitude: f64) -> Self {
        Profile::Sinusoid {
            base,
            amplitude,
            harmonic: 1.0,
            phase: PI / 2.0,
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Profile::Constant { value } if *value == 0.0)
    }

    pub fn eval(&self, x: f64, half_width: f64) -> Result<f64> {
        match self {
            Profile::Constant { value } => Ok(*value),
            Profile::Affine {
                intercept,
                slope,
                min,
                max,
            } => {
                let mut v = intercept + slope * x;
                if let Some(lo) = min {
                    v = v.max(*lo);
                }
                if let Some(hi) = max {
                    v = v.min(*hi);
                }
                Ok(v)
            }
            Profile::Sinusoid {
                base,
                amplitude,
                harmonic,
                phase,
            } => Ok(base + amplitude * (harmonic * PI * x / half_width + phase).sin()),
            Profile::Tabulated { level, values } => {
                let table = SpatialGrid::new(*level, half_width)?;
                table.check_len(values.len(), "tabulated profile")?;
                let offset = (x + half_width).rem_euclid(2.0 * half_width) / table.step();
                let k = offset.floor();
                let frac = offset - k;
                let lo = table.wrap(k as isize);
                let hi = table.next(lo);
                Ok(values[lo] * (1.0 - frac) + values[hi] * frac)
            }
        }
    }

    pub fn sample(&self, grid: &SpatialGrid) -> Result<Vec<f64>> {
        grid.points().iter().map(|&x| self.eval(x, grid.half_width())).collect()
    }
}

/// Recipe for `(sigma^2, mu, a, b)` evaluable on any lattice.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientRecipe {
    pub sigma2: Profile,
    pub mu: Profile,
    #[serde(default = "zero_profile")]
    pub a: Profile,
    #[serde(default = "zero_profile")]
    pub b: Profile,
    /// Stored lower bound for `sigma^2`; defaults to the sampled minimum.
    #[serde(default)]
    pub sigma2_floor: Option<f64>,
}

fn zero_profile() -> Profile {
    Profile::constant(0.0)
}

impl CoefficientRecipe {
    pub fn constant(sigma2: f64, mu: f64, a: f64, b: f64) -> Self {
        Self {
            sigma2: Profile::constant(sigma2),
            mu: Profile::constant(mu),
            a: Profile::constant(a),
            b: Profile::constant(b),
            sigma2_floor: None,
        }
    }

    /// `sigma^2 = 1 + 0.2 sin(pi x / L)`, `mu = 0.1 cos(pi x / L)`,
    /// `a = sin(pi x / L)`, `b = cos(pi x / L)`.
    pub fn smooth() -> Self {
        Self {
            sigma2: Profile::sine(1.0, 0.2),
            mu: Profile::cosine(0.0, 0.1),
            a: Profile::sine(0.0, 1.0),
            b: Profile::cosine(0.0, 1.0),
            sigma2_floor: None,
        }
    }

    /// True when neither `a` nor `b` carries any frequency dependence.
    pub fn is_integral_free(&self) -> bool {
        self.a.is_zero() && self.b.is_zero()
    }

    pub fn sample(&self, grid: &SpatialGrid) -> Result<CoefficientField> {
        let field = CoefficientField::new(
            grid,
            self.sigma2.sample(grid)?,
            self.mu.sample(grid)?,
            self.a.sample(grid)?,
            self.b.sample(grid)?,
        )?;
        match self.sigma2_floor {
            Some(floor) => field.with_sigma2_floor(floor),
            None => Ok(field),
        }
    }
}

/// `sigma^2, mu, a, b` sampled on a grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoefficientField {
    #[serde(skip)]
    grid: SpatialGrid,
    sigma2: Vec<f64>,
    mu: Vec<f64>,
    a: Vec<f64>,
    b: Vec<f64>,
    sigma2_floor: f64,
}

impl CoefficientField {
    pub fn new(grid: &SpatialGrid, sigma2: Vec<f64>, mu: Vec<f64>, a: Vec<f64>, b: Vec<f64>) -> Result<Self> {
        grid.check_len(sigma2.len(), "sigma2")?;
        grid.check_len(mu.len(), "mu")?;
        grid.check_len(a.len(), "a")?;
        grid.check_len(b.len(), "b")?;
        if [&sigma2, &mu, &a, &b].iter().any(|v| v.iter().any(|x| !x.is_finite())) {
            return Err(Error::invalid("coefficients", "non-finite sample"));
        }
        let floor = sigma2.iter().copied().fold(f64::INFINITY, f64::min);
        if floor <= 0.0 {
            return Err(Error::invalid(
                "sigma2",
                format!("must be strictly positive, minimum is {floor}"),
            ));
        }
        Ok(Self {
            grid: grid.clone(),
            sigma2,
            mu,
            a,
            b,
            sigma2_floor: floor,
        })
    }

    pub fn constant(grid: &SpatialGrid, sigma2: f64, mu: f64, a: f64, b: f64) -> Result<Self> {
        let n = grid.len();
        Self::new(grid, vec![sigma2; n], vec![mu; n], vec![a; n], vec![b; n])
    }

    /// Replaces the stored lower bound; it must not exceed any sample.
    pub fn with_sigma2_floor(mut self, floor: f64) -> Result<Self> {
        if !(floor > 0.0) {
            return Err(Error::invalid("sigma2_floor", "must be positive"));
        }
        if let Some(k) = self.sigma2.iter().position(|&s| s < floor) {
            return Err(Error::invalid(
                "sigma2_floor",
                format!(
                    "sigma2 = {} at x = {} is below the floor {floor}",
                    self.sigma2[k],
                    self.grid.point(k)
                ),
            ));
        }
        self.sigma2_floor = floor;
        Ok(self)
    }

    pub fn grid(&self) -> &SpatialGrid {
        &self.grid
    }

    pub fn sigma2(&self) -> &[f64] {
        &self.sigma2
    }

    pub fn mu(&self) -> &[f64] {
        &self.mu
    }

    pub fn a(&self) -> &[f64] {
        &self.a
    }

    pub fn b(&self) -> &[f64] {
        &self.b
    }

    pub fn sigma2_floor(&self) -> f64 {
        self.sigma2_floor
    }

    pub fn has_integral(&self) -> bool {
        self.a.iter().chain(&self.b).any(|&v| v != 0.0)
    }

    /// `B(x) = int_0^x b`, by the trapezoid rule along the lattice from the
    /// grid point at the origin.
    pub fn primitive_b(&self) -> Vec<f64> {
        let g = &self.grid;
        let n = g.len();
        let origin = n / 2;
        let h = g.step();
        let mut out = vec![0.0; n];
        for k in origin + 1..n {
            out[k] = out[k - 1] + 0.5 * h * (self.b[k - 1] + self.b[k]);
        }
        for k in (0..origin).rev() {
            out[k] = out[k + 1] - 0.5 * h * (self.b[k] + self.b[k + 1]);
        }
        out
    }

    /// Rates `(up, down)` of the nearest-neighbour chain at site `k`.
    pub fn rates(&self, k: usize) -> (f64, f64) {
        let h = self.grid.step();
        let diffusive = self.sigma2[k] / (2.0 * h * h);
        let drift = self.mu[k] / (2.0 * h);
        (diffusive + drift, diffusive - drift)
    }
}
