//! Platoon parameters, state layout and the assembled system matrices.
//!
//! State layout (0-based), for `n` vehicles behind a virtual reference
//! vehicle:
//!
//! ```text
//! x = [p0, v0, a0 | e1, ė1, p1, v1, a1, u1 | ... | en, ėn, pn, vn, an, un]
//! u = [u0, û0, û1, ..., û(n-1)]
//! x̃ = [x | u]
//! ```

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, Matrix};

/// Index arithmetic for the state, input and lifted vectors.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Layout {
    pub n: usize,
}

impl Layout {
    pub fn new(n: usize) -> Self {
        Self { n }
    }

    pub fn state_dim(&self) -> usize {
        3 + 6 * self.n
    }

    pub fn input_dim(&self) -> usize {
        1 + self.n
    }

    pub fn lifted_dim(&self) -> usize {
        4 + 7 * self.n
    }

    fn base(&self, i: usize) -> usize {
        debug_assert!(i >= 1 && i <= self.n);
        3 + 6 * (i - 1)
    }

    /// Position of vehicle `i`; `i = 0` is the reference vehicle.
    pub fn p(&self, i: usize) -> usize {
        if i == 0 {
            0
        } else {
            self.base(i) + 2
        }
    }

    pub fn v(&self, i: usize) -> usize {
        if i == 0 {
            1
        } else {
            self.base(i) + 3
        }
    }

    pub fn a(&self, i: usize) -> usize {
        if i == 0 {
            2
        } else {
            self.base(i) + 4
        }
    }

    pub fn e(&self, i: usize) -> usize {
        self.base(i)
    }

    pub fn e_dot(&self, i: usize) -> usize {
        self.base(i) + 1
    }

    /// Controller state `u_i` of follower `i ≥ 1`.
    pub fn u(&self, i: usize) -> usize {
        self.base(i) + 5
    }

    /// Index of the reference command `u0` within the lifted vector.
    pub fn lifted_u0(&self) -> usize {
        self.state_dim()
    }

    /// Index of `û_i`, `0 ≤ i ≤ n-1`, within the lifted vector.
    pub fn lifted_u_hat(&self, i: usize) -> usize {
        debug_assert!(i < self.n);
        self.state_dim() + 1 + i
    }
}

/// Vehicle lengths: one value for every vehicle, or one per follower.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum VehicleLength {
    Uniform(f64),
    PerVehicle(Vec<f64>),
}

impl VehicleLength {
    /// Length `L_i` of follower `i`, `1 ≤ i ≤ n`.
    pub fn of(&self, i: usize) -> f64 {
        match self {
            VehicleLength::Uniform(l) => *l,
            VehicleLength::PerVehicle(ls) => ls[i - 1],
        }
    }
}

/// Physical and control constants of a homogeneous platoon.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlatoonParams {
    /// Number of actual vehicles (the reference vehicle is not counted).
    pub n: usize,
    /// Characteristic time constant of the acceleration response, s.
    pub tau_d: f64,
    /// Time gap of the spacing policy, s.
    pub h: f64,
    /// Standstill distance, m.
    pub r: f64,
    #[serde(rename = "L")]
    pub length: VehicleLength,
    pub k_p: f64,
    pub k_d: f64,
    /// Communication interval, s.
    #[serde(rename = "T")]
    pub period: f64,
    #[serde(default = "default_speed")]
    pub v0_init: f64,
    #[serde(default)]
    pub a0_init: f64,
    #[serde(default = "default_lead_position")]
    pub p_lead_init: f64,
    /// Initial controller output of every follower.
    #[serde(default)]
    pub u_init: f64,
}

fn default_speed() -> f64 {
    30.0
}

fn default_lead_position() -> f64 {
    200.0
}

impl Default for PlatoonParams {
    /// The reference numerical scenario with eight vehicles.
    fn default() -> Self {
        Self {
            n: 8,
            tau_d: 1.5,
            h: 0.6,
            r: 10.0,
            length: VehicleLength::Uniform(4.7),
            k_p: 0.2,
            k_d: 1.2,
            period: 0.1,
            v0_init: 30.0,
            a0_init: 0.0,
            p_lead_init: 200.0,
            u_init: 0.0,
        }
    }
}

impl PlatoonParams {
    pub fn layout(&self) -> Layout {
        Layout::new(self.n)
    }

    pub fn length_of(&self, i: usize) -> f64 {
        self.length.of(i)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::param("n", format!("need at least 2 vehicles, got {}", self.n)));
        }
        let positive = [
            ("tau_d", self.tau_d),
            ("h", self.h),
            ("r", self.r),
            ("T", self.period),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::param(name, format!("must be finite and > 0, got {v}")));
            }
        }
        let finite = [
            ("k_p", self.k_p),
            ("k_d", self.k_d),
            ("a0_init", self.a0_init),
            ("p_lead_init", self.p_lead_init),
            ("u_init", self.u_init),
        ];
        for (name, v) in finite {
            if !v.is_finite() {
                return Err(Error::param(name, format!("must be finite, got {v}")));
            }
        }
        if !(self.v0_init.is_finite() && self.v0_init >= 0.0) {
            return Err(Error::param(
                "v0_init",
                format!("must be finite and >= 0, got {}", self.v0_init),
            ));
        }
        match &self.length {
            VehicleLength::Uniform(l) if !(l.is_finite() && *l > 0.0) => {
                return Err(Error::param("L", format!("must be finite and > 0, got {l}")));
            }
            VehicleLength::PerVehicle(ls) => {
                if ls.len() != self.n {
                    return Err(Error::param(
                        "L",
                        format!("expected {} lengths, got {}", self.n, ls.len()),
                    ));
                }
                if let Some((i, l)) = ls.iter().enumerate().find(|(_, l)| !(l.is_finite() && **l > 0.0)) {
                    return Err(Error::param(
                        format!("L[{i}]"),
                        format!("must be finite and > 0, got {l}"),
                    ));
                }
            }
            _ => {}
        }
        Ok(())
    }
}

/// System matrices of the platoon and the constants the step rules need.
#[derive(Debug, Clone)]
pub struct PlatoonMatrices {
    pub layout: Layout,
    pub a_c: Matrix,
    pub b_c: Matrix,
    pub a_tilde: Matrix,
    pub b1: Matrix,
    pub b2: Matrix,
    /// Distance selectors for followers 2..=n, stored at `q[i - 2]`.
    pub q: Vec<Vec<f64>>,
    /// `L_i` for followers 2..=n, aligned with `q`.
    pub lengths: Vec<f64>,
    pub norm_ac: f64,
    pub mu_atilde: f64,
    pub phi: f64,
}

fn block_m(tau: f64) -> Matrix {
    Matrix::from_rows(&[&[0.0, 1.0, 0.0], &[0.0, 0.0, 1.0], &[0.0, 0.0, -1.0 / tau]])
        .expect("static shape")
}

fn block_n(p: &PlatoonParams) -> Matrix {
    let (h, tau) = (p.h, p.tau_d);
    Matrix::from_rows(&[
        &[0.0, 0.0, 0.0, -1.0, -h, 0.0],
        &[0.0, 0.0, 0.0, 0.0, h / tau - 1.0, -h / tau],
        &[0.0, 0.0, 0.0, 1.0, 0.0, 0.0],
        &[0.0, 0.0, 0.0, 0.0, 1.0, 0.0],
        &[0.0, 0.0, 0.0, 0.0, -1.0 / tau, 1.0 / tau],
        &[p.k_p / h, p.k_d / h, 0.0, 0.0, 0.0, -1.0 / h],
    ])
    .expect("static shape")
}

fn block_g() -> Matrix {
    let mut g = Matrix::zeros(6, 3);
    g[(0, 1)] = 1.0;
    g[(1, 2)] = 1.0;
    g
}

fn block_h() -> Matrix {
    let mut h = Matrix::zeros(6, 6);
    h[(0, 3)] = 1.0;
    h[(1, 4)] = 1.0;
    h
}

/// Builds `A_c`, `B_c`, the lifted matrices, the selectors and the cached
/// norms for `params`.
pub fn assemble(params: &PlatoonParams) -> Result<PlatoonMatrices> {
    params.validate()?;
    let layout = params.layout();
    let n = params.n;
    let nx = layout.state_dim();
    let nu = layout.input_dim();
    let nl = layout.lifted_dim();

    let mut a_c = Matrix::zeros(nx, nx);
    a_c.set_block(0, 0, &block_m(params.tau_d));
    let nb = block_n(params);
    for i in 1..=n {
        let row = layout.e(i);
        if i == 1 {
            a_c.set_block(row, 0, &block_g());
        } else {
            a_c.set_block(row, layout.e(i - 1), &block_h());
        }
        a_c.set_block(row, row, &nb);
    }

    let mut b_c = Matrix::zeros(nx, nu);
    b_c[(2, 0)] = 1.0 / params.tau_d;
    for i in 1..=n {
        b_c[(layout.u(i), i)] = 1.0 / params.h;
    }

    let mut a_tilde = Matrix::zeros(nl, nl);
    a_tilde.set_block(0, 0, &a_c);
    a_tilde.set_block(0, nx, &b_c);

    let mut b1 = Matrix::zeros(nl, nx);
    b1.set_block(0, 0, &Matrix::identity(nx));
    let mut b2 = Matrix::zeros(nl, nu);
    b2.set_block(nx, 0, &Matrix::identity(nu));

    let q: Vec<Vec<f64>> = (2..=n)
        .map(|i| build_q(i, n))
        .collect::<Result<_>>()?;
    let lengths = (2..=n).map(|i| params.length_of(i)).collect();

    let norm_ac = linalg::spectral_norm(&a_c)?;
    let mu_atilde = linalg::log_norm(&a_tilde)?;

    // rows qᵢᵀ(A_c b₁ᵀ + B_c b₂ᵀ), one per follower
    let flow = a_c
        .matmul(&b1.transpose())?
        .add(&b_c.matmul(&b2.transpose())?)?;
    let phi = q
        .iter()
        .map(|qi| {
            let row: Vec<f64> = (0..nl)
                .map(|j| (0..nx).map(|k| qi[k] * flow[(k, j)]).sum())
                .collect();
            linalg::norm2(&row)
        })
        .fold(0.0, f64::max);

    Ok(PlatoonMatrices {
        layout,
        a_c,
        b_c,
        a_tilde,
        b1,
        b2,
        q,
        lengths,
        norm_ac,
        mu_atilde,
        phi,
    })
}

/// Selector with `qᵢᵀx = p_{i-1} − p_i`, for follower `2 ≤ i ≤ n`.
pub fn build_q(i: usize, n: usize) -> Result<Vec<f64>> {
    if n < 2 || i < 2 || i > n {
        return Err(Error::Index {
            index: i,
            lo: 2,
            hi: n,
        });
    }
    let layout = Layout::new(n);
    let mut q = vec![0.0; layout.state_dim()];
    q[layout.p(i - 1)] = 1.0;
    q[layout.p(i)] = -1.0;
    Ok(q)
}

impl PlatoonMatrices {
    /// Inter-vehicle distances `d_2..d_n` read from a state or lifted vector.
    pub fn distances(&self, x: &[f64]) -> Vec<f64> {
        let nx = self.layout.state_dim();
        self.q
            .iter()
            .zip(&self.lengths)
            .map(|(qi, l)| linalg::dot(qi, &x[..nx]) - l)
            .collect()
    }

    /// Smallest of [`distances`](Self::distances), without allocating.
    pub fn min_distance(&self, x: &[f64]) -> f64 {
        let nx = self.layout.state_dim();
        self.q
            .iter()
            .zip(&self.lengths)
            .map(|(qi, l)| linalg::dot(qi, &x[..nx]) - l)
            .fold(f64::INFINITY, f64::min)
    }

    /// Velocities `v_0..v_n` read from a state or lifted vector.
    pub fn velocities(&self, x: &[f64]) -> Vec<f64> {
        (0..=self.layout.n).map(|i| x[self.layout.v(i)]).collect()
    }
}

/// Full platoon state at time `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct PlatoonState {
    pub x: Vec<f64>,
    pub u: Vec<f64>,
    pub t: f64,
}

impl PlatoonState {
    pub fn lifted(&self) -> Vec<f64> {
        self.x.iter().chain(&self.u).copied().collect()
    }

    pub fn from_lifted(layout: Layout, x_tilde: &[f64], t: f64) -> Self {
        let nx = layout.state_dim();
        Self {
            x: x_tilde[..nx].to_vec(),
            u: x_tilde[nx..].to_vec(),
            t,
        }
    }
}

/// Cruise state at `t = 0`: equal speeds and accelerations, followers spaced
/// `r + h·v` apart (front to front), controllers at `u_init`, and each
/// received command equal to the sender's initial output.
pub fn initial_state(params: &PlatoonParams) -> Result<PlatoonState> {
    params.validate()?;
    let layout = params.layout();
    let n = params.n;
    let v = params.v0_init;
    let a = params.a0_init;
    let mut x = vec![0.0; layout.state_dim()];
    x[layout.p(0)] = params.p_lead_init;
    x[layout.v(0)] = v;
    x[layout.a(0)] = a;
    for i in 1..=n {
        x[layout.p(i)] = params.p_lead_init - (params.r + params.h * v) * i as f64;
        x[layout.v(i)] = v;
        x[layout.a(i)] = a;
        x[layout.u(i)] = params.u_init;
    }
    for i in 1..=n {
        let gap = x[layout.p(i - 1)] - x[layout.p(i)] - params.length_of(i);
        x[layout.e(i)] = gap - (params.r + params.h * x[layout.v(i)]);
        x[layout.e_dot(i)] = x[layout.v(i - 1)] - x[layout.v(i)] - params.h * x[layout.a(i)];
    }

    let mut u = vec![0.0; layout.input_dim()];
    for i in 1..n {
        u[1 + i] = x[layout.u(i)];
    }
    Ok(PlatoonState { x, u, t: 0.0 })
}
