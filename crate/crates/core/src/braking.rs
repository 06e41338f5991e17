//! Desired acceleration of the reference vehicle during a sudden brake.
//!
//! The command is `0` before `t_brake` and `max{−γ, −η·v0(t)}` afterwards.
//! Until the switch time `t*` the constant deceleration `−γ` binds; after it
//! the proportional term does, and `v0` then obeys
//! `τ_d·v̈0 + v̇0 + η·v0 = 0`, which has the closed-form solutions evaluated
//! here. Only overdamped and critically damped decays (`η ≤ 1/(4τ_d)`) are
//! supported.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{lambert_w, Branch};
use crate::model::PlatoonParams;

/// Relative slack used when comparing sampled grid times `k·T` against
/// switching times, so that `50 × 0.1` counts as reaching `5.0`.
const GRID_SLACK: f64 = 1e-9;
/// Relative tolerance for classifying `η = 1/(4τ_d)` as critically damped.
const CRITICAL_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BrakeParams {
    pub t_brake: f64,
    pub gamma: f64,
    pub eta: f64,
}

impl Default for BrakeParams {
    fn default() -> Self {
        Self {
            t_brake: 5.0,
            gamma: 1.2,
            eta: 0.1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    Overdamped,
    CriticallyDamped,
}

impl BrakeParams {
    pub fn validate(&self, tau_d: f64) -> Result<Regime> {
        for (name, v) in [("t_brake", self.t_brake), ("gamma", self.gamma), ("eta", self.eta)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::param(name, format!("must be finite and > 0, got {v}")));
            }
        }
        let critical = 1.0 / (4.0 * tau_d);
        if (self.eta - critical).abs() <= CRITICAL_TOL * critical {
            Ok(Regime::CriticallyDamped)
        } else if self.eta < critical {
            Ok(Regime::Overdamped)
        } else {
            Err(Error::param(
                "eta",
                format!(
                    "{} exceeds 1/(4 tau_d) = {critical}; the underdamped (oscillating) brake is not supported",
                    self.eta
                ),
            ))
        }
    }
}

/// Reference-vehicle velocity and acceleration at `t_brake`, with zero
/// command before it.
pub fn ref_state_at_brake(params: &PlatoonParams, brake: &BrakeParams) -> (f64, f64) {
    let tau = params.tau_d;
    let t = brake.t_brake;
    let decay = (-t / tau).exp();
    let a = params.a0_init * decay;
    let v = params.v0_init + tau * params.a0_init * (1.0 - decay);
    (v, a)
}

/// Velocity of the reference vehicle on `[t_brake, t*]`, while `−γ` binds.
pub fn v0_constant_decel(brake: &BrakeParams, v0b: f64, a0b: f64, tau_d: f64, t: f64) -> f64 {
    let s = t - brake.t_brake;
    v0b + tau_d * (a0b + brake.gamma) * (1.0 - (-s / tau_d).exp()) - brake.gamma * s
}

/// `β₁` of the switch-time formula.
pub fn beta1(brake: &BrakeParams, v0b: f64, a0b: f64, tau_d: f64) -> f64 {
    let (g, e, tb) = (brake.gamma, brake.eta, brake.t_brake);
    (g / e - v0b - tau_d * a0b - g * tau_d - g * tb) / (g * tau_d)
}

/// First time `t ≥ t_brake` at which `−η·v0(t) ≥ −γ`.
///
/// Solved in closed form with the Lambert W function. Both real branches are
/// tried and the earliest root not before `t_brake` is kept. When the
/// proportional term already binds at `t_brake` the result is `t_brake`.
pub fn compute_t_star(brake: &BrakeParams, v0b: f64, a0b: f64, tau_d: f64) -> Result<f64> {
    let (g, e, tb) = (brake.gamma, brake.eta, brake.t_brake);
    if v0b <= g / e {
        return Ok(tb);
    }
    let b1 = beta1(brake, v0b, a0b, tau_d);
    let arg = -(a0b + g) / g * (tb / tau_d + b1).exp();

    let mut best: Option<f64> = None;
    for branch in [Branch::Principal, Branch::MinusOne] {
        let Ok(w) = lambert_w(arg, branch) else {
            continue;
        };
        let t = tau_d * (w - b1);
        if t.is_finite() && t >= tb * (1.0 - GRID_SLACK) {
            let t = t.max(tb);
            best = Some(best.map_or(t, |b: f64| b.min(t)));
        }
    }
    best.ok_or_else(|| {
        Error::Validation(format!(
            "no switch time at or after t_brake = {tb} (Lambert W argument {arg:e})"
        ))
    })
}

/// Precomputed brake profile of the reference vehicle.
#[derive(Debug, Clone, PartialEq)]
pub struct BrakeSchedule {
    pub params: BrakeParams,
    pub tau_d: f64,
    pub regime: Regime,
    pub t_star: f64,
    pub v0_at_brake: f64,
    pub a0_at_brake: f64,
    /// Velocity and acceleration of the reference vehicle at `t*`.
    pub v0_at_switch: f64,
    pub a0_at_switch: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub beta3: f64,
    pub beta4: f64,
    pub beta5: f64,
    pub lambda1: f64,
    pub lambda2: f64,
    pub lambda3: f64,
}

impl BrakeSchedule {
    pub fn new(platoon: &PlatoonParams, brake: BrakeParams) -> Result<Self> {
        let tau = platoon.tau_d;
        let regime = brake.validate(tau)?;
        let (v0b, a0b) = ref_state_at_brake(platoon, &brake);
        let t_star = compute_t_star(&brake, v0b, a0b, tau)?;
        let (g, eta) = (brake.gamma, brake.eta);

        let (v_sw, a_sw) = if t_star > brake.t_brake {
            let a = (a0b + g) * ((brake.t_brake - t_star) / tau).exp() - g;
            (g / eta, a)
        } else {
            (v0b, a0b)
        };

        let disc = (1.0 - 4.0 * eta * tau).max(0.0).sqrt();
        let lambda1 = (-1.0 + disc) / (2.0 * tau);
        let lambda2 = (-1.0 - disc) / (2.0 * tau);
        let lambda3 = -1.0 / (2.0 * tau);
        let (beta2, beta3) = if regime == Regime::Overdamped {
            (
                (a_sw - lambda2 * v_sw) / (lambda1 - lambda2),
                (lambda1 * v_sw - a_sw) / (lambda1 - lambda2),
            )
        } else {
            (f64::NAN, f64::NAN)
        };
        let beta4 = v_sw;
        let beta5 = a_sw - lambda3 * v_sw;

        Ok(Self {
            params: brake,
            tau_d: tau,
            regime,
            t_star,
            v0_at_brake: v0b,
            a0_at_brake: a0b,
            v0_at_switch: v_sw,
            a0_at_switch: a_sw,
            beta1: beta1(&brake, v0b, a0b, tau),
            beta2,
            beta3,
            beta4,
            beta5,
            lambda1,
            lambda2,
            lambda3,
        })
    }

    /// Reference velocity for `t ≥ t*` from the closed-form decay.
    pub fn v0_after_switch(&self, t: f64) -> f64 {
        let s = t - self.t_star;
        match self.regime {
            Regime::Overdamped => {
                self.beta2 * (self.lambda1 * s).exp() + self.beta3 * (self.lambda2 * s).exp()
            }
            Regime::CriticallyDamped => (self.lambda3 * s).exp() * (self.beta4 + self.beta5 * s),
        }
    }

    /// Continuous-time command `u0(t)`.
    pub fn u0_continuous(&self, t: f64) -> f64 {
        if t < self.params.t_brake {
            0.0
        } else if t < self.t_star {
            -self.params.gamma
        } else {
            -self.params.eta * self.v0_after_switch(t)
        }
    }

    /// Command held on `[kT, (k+1)T)`: the continuous profile sampled at `kT`.
    pub fn u0_discrete(&self, k: u64, period: f64) -> f64 {
        let t = k as f64 * period;
        let slack = GRID_SLACK * period;
        if t < self.params.t_brake - slack {
            0.0
        } else if t < self.t_star - slack {
            -self.params.gamma
        } else {
            -self.params.eta * self.v0_after_switch(t)
        }
    }
}
