//! Dense complex matrix helpers: products, norms, binary powers and the
//! scaling-and-squaring exponential.

use ndarray::{Array2, Zip};
use num_complex::Complex64;

pub type CMatrix = Array2<Complex64>;

pub fn identity(n: usize) -> CMatrix {
    Array2::eye(n)
}

pub fn to_complex(m: &Array2<f64>) -> CMatrix {
    m.mapv(|v| Complex64::new(v, 0.0))
}

/// Maximum absolute row sum.
pub fn inf_norm(m: &CMatrix) -> f64 {
    m.rows()
        .into_iter()
        .map(|row| row.iter().map(|v| v.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Largest entry modulus.
pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().map(|v| v.norm()).fold(0.0, f64::max)
}

/// Largest entry modulus of `a - b`.
pub fn max_abs_diff(a: &CMatrix, b: &CMatrix) -> f64 {
    let mut worst = 0.0f64;
    Zip::from(a).and(b).for_each(|x, y| worst = worst.max((x - y).norm()));
    worst
}

/// `M^N` by square-and-multiply on the bits of `N`.
pub fn matrix_power(m: &CMatrix, mut exponent: u64) -> CMatrix {
    assert!(m.is_square(), "matrix_power needs a square matrix");
    let mut result: Option<CMatrix> = None;
    let mut base = m.clone();
    while exponent > 0 {
        if exponent & 1 == 1 {
            result = Some(match result {
                None => base.clone(),
                Some(r) => r.dot(&base),
            });
        }
        exponent >>= 1;
        if exponent > 0 {
            base = base.dot(&base);
        }
    }
    result.unwrap_or_else(|| identity(m.nrows()))
}

/// Below this infinity norm the Taylor series is summed directly.
const TAYLOR_NORM: f64 = 0.5;
const TAYLOR_MAX_TERMS: usize = 40;

/// `exp(A)` by scaling and squaring around a truncated Taylor series.
///
/// The scaling `s` is the least integer with `||A||_inf / 2^s <= 1/2`; the
/// series is summed until the next term falls below `1e-18` of the partial
/// sum in the infinity norm.
pub fn expm(a: &CMatrix) -> CMatrix {
    assert!(a.is_square(), "expm needs a square matrix");
    let n = a.nrows();
    let norm = inf_norm(a);
    if n == 0 || norm == 0.0 {
        return identity(n);
    }
    let squarings = if norm > TAYLOR_NORM {
        (norm / TAYLOR_NORM).log2().ceil().max(0.0) as u32
    } else {
        0
    };
    let scaled = a * Complex64::new(0.5f64.powi(squarings as i32), 0.0);

    let mut sum = identity(n);
    let mut term = identity(n);
    for k in 1..=TAYLOR_MAX_TERMS {
        term = term.dot(&scaled) / Complex64::new(k as f64, 0.0);
        sum += &term;
        if inf_norm(&term) <= 1e-18 * inf_norm(&sum) {
            break;
        }
    }
    for _ in 0..squarings {
        sum = sum.dot(&sum);
    }
    sum
}
