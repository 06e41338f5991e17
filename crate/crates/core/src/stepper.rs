//! Step-size rules that bound the drift of every inter-vehicle distance
//! between consecutive simulation instants, and the integer time grid the
//! instants live on.
//!
//! Instants are integer multiples of the tick `T/N̄`. Every communication
//! instant `j·T` is the tick `j·N̄`, and a step never jumps past the next
//! communication instant, so the communication instants are always a subset
//! of the simulation instants and the inputs stay constant across each step.

use std::f64::consts::SQRT_2;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::norm2;
use crate::model::PlatoonMatrices;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepRuleKind {
    /// Bound from the induced norm of `A_c` and the split state `(x, u)`.
    Theorem1,
    /// Bound from the log norm of the lifted matrix and the lifted state.
    Theorem2,
}

impl std::str::FromStr for StepRuleKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "theorem1" => Ok(StepRuleKind::Theorem1),
            "theorem2" => Ok(StepRuleKind::Theorem2),
            other => Err(format!("unknown step rule `{other}` (theorem1|theorem2)")),
        }
    }
}

impl std::fmt::Display for StepRuleKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            StepRuleKind::Theorem1 => "theorem1",
            StepRuleKind::Theorem2 => "theorem2",
        })
    }
}

pub const DEFAULT_N_BAR: u64 = 100_000;

fn default_n_bar() -> u64 {
    DEFAULT_N_BAR
}

fn unit_scale() -> f64 {
    1.0
}

fn is_unit(v: &f64) -> bool {
    *v == 1.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StepRule {
    pub kind: StepRuleKind,
    /// Admissible distance drift per step, m.
    pub alpha: f64,
    /// Ticks per communication interval.
    #[serde(default = "default_n_bar")]
    pub n_bar: u64,
    /// Use `α/(φ‖x̃‖)` when the lifted log norm is not positive instead of
    /// failing.
    #[serde(default)]
    pub nonpositive_mu_fallback: bool,
    /// Multiplies every admissible step. Anything other than 1 voids the
    /// guarantee; it exists to exercise the validator.
    #[serde(default = "unit_scale", skip_serializing_if = "is_unit")]
    pub step_scale: f64,
}

impl Default for StepRule {
    fn default() -> Self {
        Self {
            kind: StepRuleKind::Theorem2,
            alpha: 1.0,
            n_bar: DEFAULT_N_BAR,
            nonpositive_mu_fallback: false,
            step_scale: 1.0,
        }
    }
}

impl StepRule {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha.is_finite() && self.alpha > 0.0) {
            return Err(Error::param("alpha", format!("must be finite and > 0, got {}", self.alpha)));
        }
        if self.n_bar == 0 {
            return Err(Error::param("n_bar", "must be >= 1"));
        }
        if !(self.step_scale.is_finite() && self.step_scale > 0.0) {
            return Err(Error::param("step_scale", "must be finite and > 0"));
        }
        Ok(())
    }

    /// Checks the preconditions of the rule against assembled matrices.
    pub fn check_matrices(&self, mats: &PlatoonMatrices) -> Result<()> {
        if self.kind == StepRuleKind::Theorem2
            && mats.mu_atilde <= 0.0
            && !self.nonpositive_mu_fallback
        {
            return Err(Error::NonPositiveLogNorm {
                mu: mats.mu_atilde,
            });
        }
        Ok(())
    }

    /// Admissible step length from the lifted state `x̃(t_k)`, in seconds.
    pub fn raw_step(&self, x_tilde: &[f64], mats: &PlatoonMatrices) -> Result<f64> {
        let raw = match self.kind {
            StepRuleKind::Theorem1 => {
                let nx = mats.layout.state_dim();
                max_step_theorem1(&x_tilde[..nx], &x_tilde[nx..], mats, self.alpha)
            }
            StepRuleKind::Theorem2 => {
                if mats.mu_atilde <= 0.0 && self.nonpositive_mu_fallback {
                    max_step_nonpositive_mu(x_tilde, mats, self.alpha)
                } else {
                    max_step_theorem2(x_tilde, mats, self.alpha)?
                }
            }
        };
        Ok(raw * self.step_scale)
    }
}

/// `ln(α / (√2 (‖x‖ + ‖B_c u‖/‖A_c‖)) + 1) / ‖A_c‖`, or `+∞` when the
/// state and input vanish.
pub fn max_step_theorem1(x: &[f64], u: &[f64], mats: &PlatoonMatrices, alpha: f64) -> f64 {
    let bu = mats.b_c.mul_vec(u).expect("input length matches B_c");
    let scale = norm2(x) + norm2(&bu) / mats.norm_ac;
    if scale == 0.0 {
        return f64::INFINITY;
    }
    (alpha / (SQRT_2 * scale)).ln_1p() / mats.norm_ac
}

/// `ln(μ(Ã)·α / (φ‖x̃‖) + 1) / μ(Ã)`, or `+∞` when the lifted state vanishes.
pub fn max_step_theorem2(x_tilde: &[f64], mats: &PlatoonMatrices, alpha: f64) -> Result<f64> {
    let mu = mats.mu_atilde;
    if mu <= 0.0 {
        return Err(Error::NonPositiveLogNorm { mu });
    }
    let norm = norm2(x_tilde);
    if norm == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok((mu * alpha / (mats.phi * norm)).ln_1p() / mu)
}

/// `μ → 0` limit of the lifted rule, sound whenever `μ(Ã) ≤ 0`.
pub fn max_step_nonpositive_mu(x_tilde: &[f64], mats: &PlatoonMatrices, alpha: f64) -> f64 {
    let norm = norm2(x_tilde);
    if norm == 0.0 {
        return f64::INFINITY;
    }
    alpha / (mats.phi * norm)
}

/// Integer time grid with `n_bar` ticks per communication interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    pub period: f64,
    pub n_bar: u64,
}

impl Grid {
    pub fn new(period: f64, n_bar: u64) -> Self {
        Self { period, n_bar }
    }

    pub fn tick(&self) -> f64 {
        self.period / self.n_bar as f64
    }

    pub fn seconds(&self, tick: u64) -> f64 {
        (tick / self.n_bar) as f64 * self.period
            + (tick % self.n_bar) as f64 * self.tick()
    }

    /// Communication instant index if `tick` is one.
    pub fn comm_index(&self, tick: u64) -> Option<u64> {
        (tick % self.n_bar == 0).then_some(tick / self.n_bar)
    }

    /// Quantized step `ν = ⌊(N̄/T)·raw⌋`, capped at `N̄`.
    pub fn quantize(&self, raw_step: f64) -> Result<u64> {
        let ticks = raw_step * self.n_bar as f64 / self.period;
        if ticks.is_nan() || ticks < 1.0 {
            return Err(Error::Resolution {
                raw_step,
                tick: self.tick(),
            });
        }
        if ticks >= self.n_bar as f64 {
            Ok(self.n_bar)
        } else {
            Ok(ticks.floor() as u64)
        }
    }

    /// Next simulation instant after `tick`: the quantized step, cut short at
    /// the next communication instant.
    pub fn next_instant(&self, tick: u64, raw_step: f64) -> Result<u64> {
        let nu = self.quantize(raw_step)?;
        let to_boundary = self.n_bar - tick % self.n_bar;
        Ok(tick + nu.min(to_boundary))
    }
}

/// Seconds-based form of [`Grid::next_instant`]; `t_k` must sit on the grid.
pub fn next_instant(t_k: f64, raw_step: f64, period: f64, n_bar: u64) -> Result<f64> {
    let grid = Grid::new(period, n_bar);
    let tick = (t_k / grid.tick()).round() as u64;
    Ok(grid.seconds(grid.next_instant(tick, raw_step)?))
}
