//! Independent reference computations shared by the integration tests.
//! Nothing here calls into the crate's numerical kernels.

#![allow(dead_code)]

/// Row-major dense matrix as nested vectors.
pub type Dense = Vec<Vec<f64>>;

pub fn dense(m: &platoon_core::linalg::Matrix) -> Dense {
    (0..m.rows()).map(|i| m.row(i).to_vec()).collect()
}

/// Largest singular value by one-sided (Hestenes) Jacobi rotations on the
/// columns.
pub fn hestenes_sigma_max(a: &Dense) -> f64 {
    let m = a.len();
    let n = a[0].len();
    let mut cols: Vec<Vec<f64>> = (0..n).map(|j| (0..m).map(|i| a[i][j]).collect()).collect();
    for _sweep in 0..100 {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let alpha: f64 = cols[p].iter().map(|v| v * v).sum();
                let beta: f64 = cols[q].iter().map(|v| v * v).sum();
                let gamma: f64 = cols[p].iter().zip(&cols[q]).map(|(x, y)| x * y).sum();
                if gamma.abs() <= 1e-15 * (alpha * beta).sqrt() || gamma == 0.0 {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let t = if zeta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for k in 0..m {
                    let (x, y) = (cols[p][k], cols[q][k]);
                    cols[p][k] = c * x - s * y;
                    cols[q][k] = s * x + c * y;
                }
            }
        }
        if !rotated {
            break;
        }
    }
    cols.iter()
        .map(|c| c.iter().map(|v| v * v).sum::<f64>().sqrt())
        .fold(0.0, f64::max)
}

/// Householder reduction of a symmetric matrix to tridiagonal form;
/// returns `(diagonal, off-diagonal)`.
fn tridiagonalize(s: &Dense) -> (Vec<f64>, Vec<f64>) {
    let n = s.len();
    let mut a = s.clone();
    for k in 0..n.saturating_sub(2) {
        let x: Vec<f64> = (k + 1..n).map(|i| a[i][k]).collect();
        let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 {
            continue;
        }
        let mut v = x.clone();
        v[0] += if x[0] >= 0.0 { norm } else { -norm };
        let vnorm2: f64 = v.iter().map(|t| t * t).sum();
        if vnorm2 == 0.0 {
            continue;
        }
        // A ← H A H with H = I − 2 v vᵀ / vᵀv acting on indices k+1..n.
        let idx: Vec<usize> = (k + 1..n).collect();
        for j in 0..n {
            let dot: f64 = idx.iter().zip(&v).map(|(&i, vi)| vi * a[i][j]).sum();
            let f = 2.0 * dot / vnorm2;
            for (&i, vi) in idx.iter().zip(&v) {
                a[i][j] -= f * vi;
            }
        }
        for row in a.iter_mut() {
            let dot: f64 = idx.iter().zip(&v).map(|(&j, vj)| vj * row[j]).sum();
            let f = 2.0 * dot / vnorm2;
            for (&j, vj) in idx.iter().zip(&v) {
                row[j] -= f * vj;
            }
        }
    }
    let d = (0..n).map(|i| a[i][i]).collect();
    let e = (1..n).map(|i| a[i][i - 1]).collect();
    (d, e)
}

/// Number of eigenvalues of the tridiagonal `(d, e)` below `x` (Sturm count).
fn sturm_count(d: &[f64], e: &[f64], x: f64) -> usize {
    let mut count = 0;
    let mut q = 1.0;
    for i in 0..d.len() {
        let off = if i == 0 { 0.0 } else { e[i - 1] * e[i - 1] };
        q = d[i] - x - if i == 0 { 0.0 } else { off / q };
        if q == 0.0 {
            q = -f64::EPSILON * (d[i].abs() + x.abs() + 1.0);
        }
        if q < 0.0 {
            count += 1;
        }
    }
    count
}

/// Largest eigenvalue of a symmetric matrix by Sturm bisection.
pub fn sturm_lambda_max(s: &Dense) -> f64 {
    let n = s.len();
    let (d, e) = tridiagonalize(s);
    let radius = (0..n)
        .map(|i| d[i].abs() + if i > 0 { e[i - 1].abs() } else { 0.0 } + e.get(i).map_or(0.0, |v| v.abs()))
        .fold(0.0, f64::max)
        + 1.0;
    let (mut lo, mut hi) = (-radius, radius);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if sturm_count(&d, &e, mid) >= n {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

/// `λ_max((A + Aᵀ)/2)` through [`sturm_lambda_max`].
pub fn log_norm_oracle(a: &Dense) -> f64 {
    let n = a.len();
    let sym: Dense = (0..n)
        .map(|i| (0..n).map(|j| 0.5 * (a[i][j] + a[j][i])).collect())
        .collect();
    sturm_lambda_max(&sym)
}

/// Classical RK4 for `y' = f(t, y)` with `steps` equal steps; returns the
/// state at every step boundary, the initial one included.
pub fn rk4_path<F>(f: F, t0: f64, y0: &[f64], t1: f64, steps: usize) -> Vec<(f64, Vec<f64>)>
where
    F: Fn(f64, &[f64]) -> Vec<f64>,
{
    let h = (t1 - t0) / steps as f64;
    let mut y = y0.to_vec();
    let mut out = vec![(t0, y.clone())];
    let axpy = |y: &[f64], k: &[f64], s: f64| -> Vec<f64> { y.iter().zip(k).map(|(a, b)| a + s * b).collect() };
    for s in 0..steps {
        let t = t0 + s as f64 * h;
        let k1 = f(t, &y);
        let k2 = f(t + 0.5 * h, &axpy(&y, &k1, 0.5 * h));
        let k3 = f(t + 0.5 * h, &axpy(&y, &k2, 0.5 * h));
        let k4 = f(t + h, &axpy(&y, &k3, h));
        for i in 0..y.len() {
            y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        out.push((t0 + (s + 1) as f64 * h, y.clone()));
    }
    out
}

/// Spearman rank correlation with average ranks for ties.
pub fn spearman(x: &[f64], y: &[f64]) -> f64 {
    fn ranks(v: &[f64]) -> Vec<f64> {
        let mut idx: Vec<usize> = (0..v.len()).collect();
        idx.sort_by(|&a, &b| v[a].partial_cmp(&v[b]).unwrap());
        let mut r = vec![0.0; v.len()];
        let mut i = 0;
        while i < idx.len() {
            let mut j = i;
            while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
                j += 1;
            }
            let avg = (i + j) as f64 / 2.0 + 1.0;
            for k in i..=j {
                r[idx[k]] = avg;
            }
            i = j + 1;
        }
        r
    }
    let (rx, ry) = (ranks(x), ranks(y));
    let n = x.len() as f64;
    let mx = rx.iter().sum::<f64>() / n;
    let my = ry.iter().sum::<f64>() / n;
    let cov: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sx = rx.iter().map(|a| (a - mx).powi(2)).sum::<f64>().sqrt();
    let sy = ry.iter().map(|b| (b - my).powi(2)).sum::<f64>().sqrt();
    cov / (sx * sy)
}

/// Reference-vehicle velocity during a brake maneuver, by RK4 on
/// `ṗ₀ = v₀, v̇₀ = a₀, ȧ₀ = (u₀ − a₀)/τ` with `u₀ = −γ` until `t_star` and
/// `u₀ = −η v₀` afterwards. Starts at `t_brake` from `(v0b, a0b)`.
pub struct BrakeRk4 {
    pub tau: f64,
    pub gamma: f64,
    pub eta: f64,
}

impl BrakeRk4 {
    /// `(t, v₀)` samples on `[t_star, t_star + span]`.
    pub fn after_switch(
        &self,
        t_brake: f64,
        v0b: f64,
        a0b: f64,
        t_star: f64,
        span: f64,
        dt: f64,
    ) -> Vec<(f64, f64)> {
        let tau = self.tau;
        let gamma = self.gamma;
        let eta = self.eta;
        let phase1 = |_t: f64, y: &[f64]| vec![y[1], (-gamma - y[1]) / tau];
        let steps1 = (((t_star - t_brake) / dt).ceil() as usize).max(1);
        let at_switch = rk4_path(phase1, t_brake, &[v0b, a0b], t_star, steps1)
            .pop()
            .unwrap()
            .1;
        let phase2 = |_t: f64, y: &[f64]| vec![y[1], (-eta * y[0] - y[1]) / tau];
        let steps2 = (span / dt).ceil() as usize;
        rk4_path(phase2, t_star, &at_switch, t_star + span, steps2)
            .into_iter()
            .map(|(t, y)| (t, y[0]))
            .collect()
    }
}
