//! Batches of runs: gain sweeps and seeded Monte-Carlo campaigns.
//!
//! Runs fan out over the rayon pool; outputs are assembled in input order,
//! so results do not depend on the schedule.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::comms::{derive_seed, LossModel};
use crate::error::{Error, Result};
use crate::simulator::{RunSummary, SimConfig, Simulation, StopReason};

/// `start, start + step, …` up to and including `stop`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Range {
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

impl Range {
    pub fn new(start: f64, stop: f64, step: f64) -> Self {
        Self { start, stop, step }
    }

    pub fn single(v: f64) -> Self {
        Self::new(v, v, 1.0)
    }

    pub fn validate(&self, field: &str) -> Result<()> {
        if !(self.start.is_finite() && self.stop.is_finite() && self.step.is_finite()) {
            return Err(Error::param(field, "bounds and step must be finite"));
        }
        if self.step <= 0.0 {
            return Err(Error::param(field, format!("step must be > 0, got {}", self.step)));
        }
        if self.stop < self.start {
            return Err(Error::param(field, "range is empty (stop < start)"));
        }
        Ok(())
    }

    /// Grid values, rounded to 12 decimals so that `0.2 + 3·0.05` prints as
    /// `0.35`.
    pub fn values(&self) -> Vec<f64> {
        let count = ((self.stop - self.start) / self.step + 1e-9).floor() as usize + 1;
        (0..count)
            .map(|i| ((self.start + i as f64 * self.step) * 1e12).round() / 1e12)
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub kp: Range,
    pub kd: Range,
}

impl Default for SweepSpec {
    fn default() -> Self {
        Self {
            kp: Range::new(0.2, 0.5, 0.05),
            kd: Range::new(0.2, 1.3, 0.05),
        }
    }
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        self.kp.validate("kp")?;
        self.kd.validate("kd")
    }

    /// `(k_p, k_d)` pairs, `k_p` outermost.
    pub fn points(&self) -> Vec<(f64, f64)> {
        let kd = self.kd.values();
        self.kp
            .values()
            .into_iter()
            .flat_map(|p| kd.iter().map(move |&d| (p, d)))
            .collect()
    }
}

/// One grid point. A point whose configuration is rejected outright keeps
/// the message in `error` and has no summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub k_p: f64,
    pub k_d: f64,
    pub summary: Option<RunSummary>,
    pub error: Option<String>,
}

impl SweepRow {
    pub fn d_prime_min(&self) -> Option<f64> {
        self.summary.as_ref().map(|s| s.d_prime_min)
    }

    pub fn k_prime_end(&self) -> Option<usize> {
        self.summary.as_ref().map(|s| s.k_prime_end)
    }

    pub fn stop_reason(&self) -> Option<StopReason> {
        self.summary.as_ref().map(|s| s.stop_reason)
    }
}

pub fn with_gains(base: &SimConfig, k_p: f64, k_d: f64) -> SimConfig {
    let mut cfg = base.clone();
    cfg.params.k_p = k_p;
    cfg.params.k_d = k_d;
    cfg
}

/// Runs `base` at every grid point of `spec`.
pub fn sweep(base: &SimConfig, spec: &SweepSpec) -> Result<Vec<SweepRow>> {
    spec.validate()?;
    Ok(spec
        .points()
        .into_par_iter()
        .map(|(k_p, k_d)| {
            let outcome = Simulation::new(with_gains(base, k_p, k_d)).and_then(|s| s.run_summary());
            match outcome {
                Ok(summary) => SweepRow {
                    k_p,
                    k_d,
                    error: summary.error.clone(),
                    summary: Some(summary),
                },
                Err(e) => SweepRow {
                    k_p,
                    k_d,
                    summary: None,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect())
}

pub const DEFAULT_BIN_WIDTH: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignSpec {
    pub runs: u64,
    pub base_seed: u64,
    /// Per-attempt loss probability of the Bernoulli channel.
    pub p: f64,
    /// `(k_p, k_d)` pairs, each run `runs` times.
    pub settings: Vec<(f64, f64)>,
    pub bin_width: f64,
}

impl CampaignSpec {
    pub fn validate(&self) -> Result<()> {
        if self.runs == 0 {
            return Err(Error::param("runs", "must be >= 1"));
        }
        if self.settings.is_empty() {
            return Err(Error::param("settings", "at least one (k_p, k_d) pair is required"));
        }
        if !(self.bin_width.is_finite() && self.bin_width > 0.0) {
            return Err(Error::param("bin_width", "must be finite and > 0"));
        }
        LossModel::Bernoulli {
            p: self.p,
            seed: self.base_seed,
        }
        .validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignRun {
    pub run: u64,
    pub seed: u64,
    #[serde(flatten)]
    pub summary: RunSummary,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bin {
    pub lo: f64,
    pub hi: f64,
    pub count: u64,
}

/// Fixed-width histogram over `[w·⌊min/w⌋, w·(⌊max/w⌋ + 1))`, every bin
/// in between listed even when empty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub bin_width: f64,
    pub bins: Vec<Bin>,
}

impl Histogram {
    pub fn build(values: &[f64], bin_width: f64) -> Self {
        let index = |v: f64| (v / bin_width).floor() as i64;
        let finite = values.iter().copied().filter(|v| v.is_finite());
        let (lo, hi) = finite.fold((i64::MAX, i64::MIN), |(lo, hi), v| {
            (lo.min(index(v)), hi.max(index(v)))
        });
        if lo > hi {
            return Self { bin_width, bins: Vec::new() };
        }
        let mut bins: Vec<Bin> = (lo..=hi)
            .map(|b| Bin {
                lo: b as f64 * bin_width,
                hi: (b + 1) as f64 * bin_width,
                count: 0,
            })
            .collect();
        for v in values.iter().copied().filter(|v| v.is_finite()) {
            bins[(index(v) - lo) as usize].count += 1;
        }
        Self { bin_width, bins }
    }

    pub fn total(&self) -> u64 {
        self.bins.iter().map(|b| b.count).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SettingResult {
    pub k_p: f64,
    pub k_d: f64,
    pub runs: Vec<CampaignRun>,
    pub histogram: Histogram,
}

impl SettingResult {
    pub fn d_prime_mins(&self) -> Vec<f64> {
        self.runs.iter().map(|r| r.summary.d_prime_min).collect()
    }
}

/// Runs every setting `spec.runs` times over the Bernoulli channel; run `r`
/// uses seed `derive_seed(base_seed, r)` in every setting.
pub fn montecarlo(base: &SimConfig, spec: &CampaignSpec) -> Result<Vec<SettingResult>> {
    spec.validate()?;
    spec.settings
        .iter()
        .map(|&(k_p, k_d)| {
            let sim = Simulation::new(with_gains(base, k_p, k_d))?;
            let runs = (0..spec.runs)
                .into_par_iter()
                .map(|r| {
                    let seed = derive_seed(spec.base_seed, r);
                    let summary = sim
                        .with_loss(LossModel::Bernoulli { p: spec.p, seed })?
                        .run_summary()?;
                    Ok(CampaignRun { run: r, seed, summary })
                })
                .collect::<Result<Vec<_>>>()?;
            let values: Vec<f64> = runs.iter().map(|r| r.summary.d_prime_min).collect();
            Ok(SettingResult {
                k_p,
                k_d,
                histogram: Histogram::build(&values, spec.bin_width),
                runs,
            })
        })
        .collect()
}
