//! Packet-loss models and the hold-or-update rule for received commands.
//!
//! Follower `i` (1 ≤ i ≤ n−1) transmits its controller output `u_i` to
//! follower `i+1` at every communication instant `s_j = j·T`. The receiver
//! keeps the last value that arrived, so `û_i` is piecewise constant. The
//! attempt at `s_0` always succeeds.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Layout, PlatoonState};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum LossModel {
    /// Exactly `ell` failures between consecutive successes.
    Consecutive { ell: u64 },
    /// Independent losses with probability `p` per attempt and per vehicle.
    Bernoulli { p: f64, seed: u64 },
}

impl LossModel {
    pub fn validate(&self) -> Result<()> {
        match *self {
            LossModel::Consecutive { ell } if ell == 0 => {
                Err(Error::param("loss.ell", "must be >= 1"))
            }
            LossModel::Bernoulli { p, .. } if !(0.0..=1.0).contains(&p) => {
                Err(Error::param("loss.p", format!("must lie in [0, 1], got {p}")))
            }
            _ => Ok(()),
        }
    }

    /// Failure indicator `l_j^i` for sender `i` at instant `j`: `true` when the
    /// attempt is lost.
    pub fn loss_bit(&self, n: usize, i: usize, j: u64) -> Result<bool> {
        if i < 1 || i + 1 > n {
            return Err(Error::Index {
                index: i,
                lo: 1,
                hi: n.saturating_sub(1),
            });
        }
        Ok(self.lost(i, j))
    }

    fn lost(&self, i: usize, j: u64) -> bool {
        if j == 0 {
            return false;
        }
        match *self {
            LossModel::Consecutive { ell } => j % ell.saturating_add(1) != 0,
            LossModel::Bernoulli { p, seed } => unit_interval(hash3(seed, i as u64, j)) < p,
        }
    }
}

const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Counter-based hash of a `(seed, a, b)` triple.
fn hash3(seed: u64, a: u64, b: u64) -> u64 {
    let h = splitmix64(seed);
    let h = splitmix64(h ^ a.wrapping_mul(0xd6e8_feb8_6659_fd93));
    splitmix64(h ^ b.wrapping_mul(0xa076_1d64_78bd_642f))
}

fn unit_interval(h: u64) -> f64 {
    (h >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Seed of run `r` in a campaign started from `base_seed`.
pub fn derive_seed(base_seed: u64, r: u64) -> u64 {
    hash3(base_seed, r, 0x5eed)
}

/// Loss indicators materialized over a finite horizon of instants.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LossSchedule {
    /// `bits[i - 1][j]` is `l_j^i`.
    bits: Vec<Vec<bool>>,
}

impl LossSchedule {
    pub fn generate(model: &LossModel, n: usize, instants: u64) -> Self {
        let bits = (1..n)
            .map(|i| (0..instants).map(|j| model.lost(i, j)).collect())
            .collect();
        Self { bits }
    }

    pub fn bit(&self, i: usize, j: u64) -> Option<bool> {
        self.bits.get(i.checked_sub(1)?)?.get(j as usize).copied()
    }
}

/// Applies the communication-instant update to a lifted state vector: the
/// reference command becomes `u0_j` (and is known to follower 1 without
/// radio), and every other received command is refreshed unless lost.
pub fn update_lifted(
    x_tilde: &mut [f64],
    layout: Layout,
    model: &LossModel,
    j: u64,
    u0_j: f64,
) {
    x_tilde[layout.lifted_u0()] = u0_j;
    x_tilde[layout.lifted_u_hat(0)] = u0_j;
    for i in 1..layout.n {
        if !model.lost(i, j) {
            x_tilde[layout.lifted_u_hat(i)] = x_tilde[layout.u(i)];
        }
    }
}

/// [`update_lifted`] on a split state.
pub fn update_u_hat(
    state: &mut PlatoonState,
    layout: Layout,
    model: &LossModel,
    j: u64,
    u0_j: f64,
) {
    state.u[0] = u0_j;
    state.u[1] = u0_j;
    for i in 1..layout.n {
        if !model.lost(i, j) {
            state.u[1 + i] = state.x[layout.u(i)];
        }
    }
}
