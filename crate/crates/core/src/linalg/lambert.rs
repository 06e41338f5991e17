use std::f64::consts::E;

use crate::error::{Error, Result};

const INV_E: f64 = 1.0 / E;
const MAX_ITERATIONS: usize = 100;

/// Real branch of the Lambert W function.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    /// W₀, defined on [−1/e, ∞) with values ≥ −1.
    Principal,
    /// W₋₁, defined on [−1/e, 0) with values ≤ −1.
    MinusOne,
}

impl Branch {
    fn name(self) -> &'static str {
        match self {
            Branch::Principal => "principal",
            Branch::MinusOne => "minus-one",
        }
    }
}

/// Solves `w·e^w = x` on the requested real branch with Halley's iteration.
pub fn lambert_w(x: f64, branch: Branch) -> Result<f64> {
    let domain_err = || Error::LambertDomain {
        x,
        branch: branch.name(),
    };
    if x.is_nan() || x < -INV_E {
        return Err(domain_err());
    }
    if branch == Branch::MinusOne && x >= 0.0 {
        return Err(domain_err());
    }
    if x == 0.0 {
        return Ok(0.0);
    }
    if x == f64::INFINITY {
        return Ok(f64::INFINITY);
    }

    // Distance to the branch point in the variable p = sqrt(2(1 + e·x)).
    let p2 = 2.0 * (1.0 + E * x);
    if p2 <= 0.0 {
        return Ok(-1.0);
    }
    let p = p2.sqrt();

    let mut w = match branch {
        Branch::Principal => {
            if x < -0.25 {
                -1.0 + p - p * p / 3.0 + 11.0 / 72.0 * p * p * p
            } else if x < 3.0 {
                // ln(1+x) is within a few percent of W₀ here and keeps the sign
                (1.0 + x).ln()
            } else {
                let l1 = x.ln();
                let l2 = l1.ln();
                l1 - l2 + l2 / l1
            }
        }
        Branch::MinusOne => {
            if x < -0.25 {
                -1.0 - p - p * p / 3.0 - 11.0 / 72.0 * p * p * p
            } else {
                let l1 = (-x).ln();
                let l2 = (-l1).ln();
                l1 - l2 + l2 / l1
            }
        }
    };

    for _ in 0..MAX_ITERATIONS {
        let ew = w.exp();
        let f = w * ew - x;
        let wp1 = w + 1.0;
        if wp1 == 0.0 {
            break;
        }
        let step = f / (ew * wp1 - (w + 2.0) * f / (2.0 * wp1));
        let next = w - step;
        if !next.is_finite() {
            break;
        }
        let converged = (next - w).abs() <= 4.0 * f64::EPSILON * (1.0 + next.abs());
        w = next;
        if converged {
            return Ok(w);
        }
    }
    if w.is_finite() {
        Ok(w)
    } else {
        Err(Error::NoConvergence {
            routine: "Lambert W Halley iteration",
            iterations: MAX_ITERATIONS,
        })
    }
}
