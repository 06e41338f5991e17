use super::Matrix;
use crate::error::{Error, Result};

const MAX_SWEEPS: usize = 10_000;
const OFF_DIAGONAL_TOL: f64 = 1e-12;

/// Eigenvalues of a symmetric matrix in ascending order, by cyclic Jacobi
/// rotations. Only the upper triangle is trusted to be symmetric with the
/// lower one; callers symmetrize first.
pub fn symmetric_eigenvalues(a: &Matrix) -> Result<Vec<f64>> {
    if !a.is_square() {
        return Err(Error::Dimension(format!(
            "eigenvalues need a square matrix, got {}x{}",
            a.rows(),
            a.cols()
        )));
    }
    if !a.is_finite() {
        return Err(Error::NonFinite("eigenvalue argument"));
    }
    let n = a.rows();
    let mut m = a.clone();
    let total = m.norm_frobenius();
    if total == 0.0 {
        return Ok(vec![0.0; n]);
    }

    let off = |m: &Matrix| -> f64 {
        let mut s = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                s += 2.0 * m[(i, j)] * m[(i, j)];
            }
        }
        s.sqrt()
    };

    // Sweep until the off-diagonal mass is at rounding level, or until it stops
    // shrinking once below the convergence tolerance.
    let mut residue = off(&m);
    let mut sweeps = 0;
    while residue > f64::EPSILON * total {
        if sweeps == MAX_SWEEPS {
            return Err(Error::NoConvergence {
                routine: "Jacobi eigenvalue sweep",
                iterations: MAX_SWEEPS,
            });
        }
        sweeps += 1;
        for p in 0..n {
            for q in (p + 1)..n {
                rotate(&mut m, p, q);
            }
        }
        let next = off(&m);
        if next >= residue && next <= OFF_DIAGONAL_TOL * total {
            break;
        }
        residue = next;
    }

    let mut eig: Vec<f64> = (0..n).map(|i| m[(i, i)]).collect();
    eig.sort_by(f64::total_cmp);
    Ok(eig)
}

/// Annihilates `m[p][q]` with a two-sided Jacobi rotation.
fn rotate(m: &mut Matrix, p: usize, q: usize) {
    let apq = m[(p, q)];
    if apq == 0.0 {
        return;
    }
    let app = m[(p, p)];
    let aqq = m[(q, q)];
    let theta = (aqq - app) / (2.0 * apq);
    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
    let t = if theta == 0.0 { 1.0 } else { t };
    let c = 1.0 / (t * t + 1.0).sqrt();
    let s = t * c;
    let n = m.rows();
    for k in 0..n {
        let mkp = m[(k, p)];
        let mkq = m[(k, q)];
        m[(k, p)] = c * mkp - s * mkq;
        m[(k, q)] = s * mkp + c * mkq;
    }
    for k in 0..n {
        let mpk = m[(p, k)];
        let mqk = m[(q, k)];
        m[(p, k)] = c * mpk - s * mqk;
        m[(q, k)] = s * mpk + c * mqk;
    }
    m[(p, q)] = 0.0;
    m[(q, p)] = 0.0;
}

/// Induced Euclidean norm, the square root of the largest eigenvalue of AᵀA.
pub fn spectral_norm(a: &Matrix) -> Result<f64> {
    if !a.is_finite() {
        return Err(Error::NonFinite("spectral norm argument"));
    }
    let gram = a.transpose().matmul(a)?;
    let eig = symmetric_eigenvalues(&gram)?;
    Ok(eig.last().copied().unwrap_or(0.0).max(0.0).sqrt())
}

/// Logarithmic norm induced by the Euclidean norm, `λ_max((A + Aᵀ)/2)`.
pub fn log_norm(a: &Matrix) -> Result<f64> {
    if !a.is_square() {
        return Err(Error::Dimension(format!(
            "log norm needs a square matrix, got {}x{}",
            a.rows(),
            a.cols()
        )));
    }
    let sym = a.add(&a.transpose())?.scaled(0.5);
    let eig = symmetric_eigenvalues(&sym)?;
    Ok(*eig.last().expect("non-empty matrix"))
}
