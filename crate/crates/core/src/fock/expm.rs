//! Matrix exponential by scaling and squaring with a Taylor series.

use nalgebra::{ComplexField, DMatrix};

/// Relative size of the last Taylor term kept.
pub const EXPM_TOLERANCE: f64 = 1e-12;
const MAX_TERMS: usize = 60;

fn one_norm<T: ComplexField<RealField = f64> + Copy>(m: &DMatrix<T>) -> f64 {
    m.column_iter()
        .map(|c| c.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// `exp(m)` for a square matrix.
///
/// The argument is scaled by `2^-s` so that its 1-norm is at most ½, the
/// Taylor series is summed until a term falls below machine precision
/// relative to the partial sum (well inside [`EXPM_TOLERANCE`]), and the
/// result is squared `s` times.
pub fn expm<T: ComplexField<RealField = f64> + Copy>(m: &DMatrix<T>) -> DMatrix<T> {
    assert!(m.is_square(), "expm needs a square matrix");
    let n = m.nrows();
    let norm = one_norm(m);
    let s = if norm > 0.5 {
        (norm / 0.5).log2().ceil() as i32
    } else {
        0
    };
    let a = m * T::from_real(0.5f64.powi(s));
    let mut result = DMatrix::<T>::identity(n, n);
    let mut term = DMatrix::<T>::identity(n, n);
    for k in 1..=MAX_TERMS {
        term = &term * &a * T::from_real(1.0 / k as f64);
        result += &term;
        if one_norm(&term) <= f64::EPSILON * one_norm(&result) {
            break;
        }
    }
    for _ in 0..s {
        result = &result * &result;
    }
    result
}
