use super::Matrix;
use crate::error::{Error, Result};

/// Largest 1-norm of the scaled argument fed to the Taylor core.
const SCALED_NORM_LIMIT: f64 = 0.5;
/// Degree cap of the Taylor core; at norm 0.5 the truncation error is
/// 0.5^17/17! < 1e-19.
const MAX_DEGREE: usize = 16;

/// `e^{A·dt}` by scaling and squaring around a truncated Taylor series.
///
/// Terms are accumulated as `A·term` so that sparse generators (the platoon
/// matrices have a handful of nonzeros per row) cost `O(nnz·n)` per term, and
/// exact structural zeros of the exponential stay exactly zero.
pub fn expm(a: &Matrix, dt: f64) -> Result<Matrix> {
    if !a.is_square() {
        return Err(Error::Dimension(format!(
            "expm needs a square matrix, got {}x{}",
            a.rows(),
            a.cols()
        )));
    }
    if !a.is_finite() {
        return Err(Error::NonFinite("expm argument"));
    }
    if !dt.is_finite() || dt < 0.0 {
        return Err(Error::param("dt", format!("must be finite and >= 0, got {dt}")));
    }
    let n = a.rows();
    if dt == 0.0 {
        return Ok(Matrix::identity(n));
    }

    let scaled = a.scaled(dt);
    let norm = scaled.norm_1();
    let squarings = if norm > SCALED_NORM_LIMIT {
        (norm / SCALED_NORM_LIMIT).log2().ceil() as i32
    } else {
        0
    };
    let c = scaled.scaled(0.5f64.powi(squarings));

    let mut sum = Matrix::identity(n);
    let mut term = Matrix::identity(n);
    for k in 1..=MAX_DEGREE {
        term = c.matmul(&term)?.scaled(1.0 / k as f64);
        sum = sum.add(&term)?;
        if term.norm_1() <= f64::EPSILON * 1e-3 * sum.norm_1() {
            break;
        }
    }
    for _ in 0..squarings {
        sum = sum.matmul(&sum)?;
    }
    if !sum.is_finite() {
        return Err(Error::NonFinite("expm result"));
    }
    Ok(sum)
}
