use num_complex::Complex64;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("grid at level {level} is too large: {reason}")]
    Sizing { level: u32, reason: String },

    /// The lattice is too coarse for the drift: some off-diagonal rate would
    /// become non-positive.
    #[error(
        "refinement level {level} is below the threshold m0 = {}: at x = {site} the ratio |mu| h / sigma^2 = {ratio} is not < 1",
        fmt_threshold(*.min_level)
    )]
    BelowRefinementThreshold {
        level: u32,
        min_level: Option<u32>,
        site: f64,
        ratio: f64,
    },

    #[error("no refinement level up to {cap} satisfies the drift bound; worst site x = {site}, ratio |mu| h / sigma^2 = {ratio}")]
    NoRefinementLevel { cap: u32, site: f64, ratio: f64 },

    #[error("Courant condition violated at x = {site}, z = {z}: Re(1 + dt * {diag}) = {value} with dt = {dt}; largest admissible dt is {bound}")]
    Courant {
        site: f64,
        z: Complex64,
        diag: Complex64,
        dt: f64,
        value: f64,
        bound: f64,
    },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("level mismatch: fine level {fine} is not coarse level {coarse} + 1")]
    LevelMismatch { fine: u32, coarse: u32 },

    #[error("work guard exceeded: {0}")]
    WorkGuard(String),

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("frequency grid is not uniform and real: {0}")]
    NonUniformFrequencies(String),

    #[error("sampler failed at z = {z}: {reason}")]
    Sampler { z: Complex64, reason: String },
}

fn fmt_threshold(m0: Option<u32>) -> String {
    match m0 {
        Some(m) => m.to_string(),
        None => "unknown".to_string(),
    }
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    /// True for errors raised by numerical guards (refinement threshold,
    /// Courant bound, work caps) rather than by malformed input.
    pub fn is_numerical_guard(&self) -> bool {
        matches!(
            self,
            Error::BelowRefinementThreshold { .. }
                | Error::NoRefinementLevel { .. }
                | Error::Courant { .. }
                | Error::WorkGuard(_)
                | Error::Sizing { .. }
        )
    }
}
