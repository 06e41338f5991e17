//! One simulation run: exact propagation between instants chosen by a step
//! rule, input updates at communication instants, and the running minimum of
//! the sampled inter-vehicle distances.

use std::collections::HashMap;
use std::sync::{Arc, RwLock};

use serde::{Deserialize, Serialize};

use crate::braking::{BrakeParams, BrakeSchedule};
use crate::comms::{self, LossModel};
use crate::error::{Error, Result};
use crate::linalg::{self, Matrix};
use crate::model::{self, PlatoonMatrices, PlatoonParams};
use crate::stepper::{Grid, StepRule};

pub const DEFAULT_V_STOP: f64 = 1e-3;

fn default_v_stop() -> f64 {
    DEFAULT_V_STOP
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    #[serde(rename = "platoon")]
    pub params: PlatoonParams,
    #[serde(rename = "braking")]
    pub brake: BrakeParams,
    pub loss: LossModel,
    #[serde(default)]
    pub rule: StepRule,
    pub t_end: f64,
    /// Every velocity at or below this counts as standstill, m/s.
    #[serde(default = "default_v_stop")]
    pub v_stop: f64,
}

impl Default for SimConfig {
    /// Reference scenario: eight vehicles, brake at 5 s, seven consecutive
    /// losses after every success, lifted-state rule with `α = 1 m`.
    fn default() -> Self {
        Self {
            params: PlatoonParams::default(),
            brake: BrakeParams::default(),
            loss: LossModel::Consecutive { ell: 7 },
            rule: StepRule::default(),
            t_end: 25.0,
            v_stop: DEFAULT_V_STOP,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        self.params.validate().map_err(|e| e.within("platoon"))?;
        self.brake.validate(self.params.tau_d).map_err(|e| e.within("braking"))?;
        self.loss.validate()?;
        self.rule.validate().map_err(|e| e.within("rule"))?;
        self.end_period()?;
        if !(self.v_stop.is_finite() && self.v_stop >= 0.0) {
            return Err(Error::param("v_stop", "must be finite and >= 0"));
        }
        Ok(())
    }

    /// `t_end` as a whole number of communication intervals.
    fn end_period(&self) -> Result<u64> {
        let t = self.t_end;
        let period = self.params.period;
        if !(t.is_finite() && t > 0.0) {
            return Err(Error::param("t_end", format!("must be finite and > 0, got {t}")));
        }
        let m = (t / period).round();
        if (m * period - t).abs() > 1e-9 * t.max(period) || m < 1.0 {
            return Err(Error::param(
                "t_end",
                format!("{t} is not a whole multiple of the communication interval T = {period}"),
            ));
        }
        Ok(m as u64)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    ReachedTEnd,
    Collision,
    Standstill,
    ResolutionError,
}

impl std::fmt::Display for StopReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            StopReason::ReachedTEnd => "reached_t_end",
            StopReason::Collision => "collision",
            StopReason::Standstill => "standstill",
            StopReason::ResolutionError => "resolution_error",
        })
    }
}

/// Sampled trajectory of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct SimTrace {
    /// Instants as integer ticks of `T/N̄`.
    pub ticks: Vec<u64>,
    pub instants: Vec<f64>,
    /// `d_2..d_n` at each instant.
    pub distances: Vec<Vec<f64>>,
    /// `v_0..v_n` at each instant.
    pub velocities: Vec<Vec<f64>>,
    /// Minimum sampled distance, clamped at 0 on collision.
    pub d_prime_min: f64,
    /// Minimum sampled distance before clamping.
    pub d_prime_min_raw: f64,
    pub k_prime_end: usize,
    pub stop_reason: StopReason,
    /// Message of the error that ended the run early, if any.
    pub error: Option<String>,
    /// Lifted state at each instant after the input update, when recorded.
    pub state_snapshots: Option<Vec<Vec<f64>>>,
}

/// Interval certified to contain the continuous-time minimum distance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CertifiedInterval {
    pub lower: f64,
    pub upper: f64,
    /// `true` when the lower end is positive, i.e. no collision can have
    /// happened over the simulated horizon.
    pub collision_free: bool,
}

/// `[d′_min − α, d′_min + α]`, with the lower end clamped at 0 after a
/// collision.
pub fn certified_min(trace: &SimTrace, alpha: f64) -> CertifiedInterval {
    let mut lower = trace.d_prime_min - alpha;
    if trace.stop_reason == StopReason::Collision {
        lower = lower.max(0.0);
    }
    CertifiedInterval {
        lower,
        upper: trace.d_prime_min + alpha,
        collision_free: trace.d_prime_min > alpha,
    }
}

/// `e^{Ã·dt}` in compressed-row form, so that products skip the structural
/// zeros of the block-triangular exponential.
#[derive(Debug)]
pub struct Propagator {
    matrix: Matrix,
    row_start: Vec<u32>,
    cols: Vec<u32>,
    vals: Vec<f64>,
}

impl Propagator {
    pub fn new(matrix: Matrix) -> Self {
        let mut row_start = vec![0];
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        for i in 0..matrix.rows() {
            for (j, &v) in matrix.row(i).iter().enumerate() {
                if v != 0.0 {
                    cols.push(j as u32);
                    vals.push(v);
                }
            }
            row_start.push(cols.len() as u32);
        }
        Self {
            matrix,
            row_start,
            cols,
            vals,
        }
    }

    pub fn matrix(&self) -> &Matrix {
        &self.matrix
    }

    pub fn apply(&self, x: &[f64], out: &mut [f64]) {
        for (o, w) in out.iter_mut().zip(self.row_start.windows(2)) {
            let (lo, hi) = (w[0] as usize, w[1] as usize);
            let mut acc = 0.0;
            for (&j, &v) in self.cols[lo..hi].iter().zip(&self.vals[lo..hi]) {
                acc += v * x[j as usize];
            }
            *o = acc;
        }
    }
}

/// Memo of `e^{Ã·m·tick}` keyed by the tick count `m`. Safe to share between
/// concurrent runs over the same matrices; values do not depend on the order
/// of insertion.
#[derive(Debug)]
pub struct ExpmCache {
    a_tilde: Matrix,
    tick: f64,
    entries: RwLock<HashMap<u64, Arc<Propagator>>>,
}

impl ExpmCache {
    pub fn new(a_tilde: Matrix, tick: f64) -> Self {
        Self {
            a_tilde,
            tick,
            entries: RwLock::new(HashMap::new()),
        }
    }

    pub fn get(&self, ticks: u64) -> Result<Arc<Propagator>> {
        if let Some(p) = self.entries.read().expect("cache lock").get(&ticks) {
            return Ok(Arc::clone(p));
        }
        let dt = ticks as f64 * self.tick;
        let p = Arc::new(Propagator::new(linalg::expm(&self.a_tilde, dt)?));
        let mut entries = self.entries.write().expect("cache lock");
        Ok(Arc::clone(entries.entry(ticks).or_insert(p)))
    }

    pub fn len(&self) -> usize {
        self.entries.read().expect("cache lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// `e^{Ã·dt}·x̃`, uncached.
pub fn propagate(x_tilde: &[f64], dt: f64, mats: &PlatoonMatrices) -> Result<Vec<f64>> {
    linalg::expm(&mats.a_tilde, dt)?.mul_vec(x_tilde)
}

/// A validated configuration with its matrices, brake profile and
/// exponential memo. Cloning is cheap and clones share the memo.
#[derive(Debug, Clone)]
pub struct Simulation {
    config: SimConfig,
    mats: Arc<PlatoonMatrices>,
    schedule: Arc<BrakeSchedule>,
    cache: Arc<ExpmCache>,
    grid: Grid,
    end_tick: u64,
}

impl Simulation {
    pub fn new(config: SimConfig) -> Result<Self> {
        config.validate()?;
        let mats = model::assemble(&config.params)?;
        config.rule.check_matrices(&mats)?;
        let schedule = BrakeSchedule::new(&config.params, config.brake)?;
        let grid = Grid::new(config.params.period, config.rule.n_bar);
        let end_tick = config
            .end_period()?
            .checked_mul(config.rule.n_bar)
            .ok_or_else(|| Error::param("n_bar", "t_end in ticks overflows"))?;
        let cache = ExpmCache::new(mats.a_tilde.clone(), grid.tick());
        Ok(Self {
            config,
            mats: Arc::new(mats),
            schedule: Arc::new(schedule),
            cache: Arc::new(cache),
            grid,
            end_tick,
        })
    }

    pub fn config(&self) -> &SimConfig {
        &self.config
    }

    pub fn matrices(&self) -> &PlatoonMatrices {
        &self.mats
    }

    pub fn schedule(&self) -> &BrakeSchedule {
        &self.schedule
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn cache(&self) -> &ExpmCache {
        &self.cache
    }

    /// Same platoon, brake and rule with a different loss model; the memo
    /// stays shared.
    pub fn with_loss(&self, loss: LossModel) -> Result<Self> {
        loss.validate()?;
        let mut sim = self.clone();
        sim.config.loss = loss;
        Ok(sim)
    }

    pub fn run(&self) -> Result<SimTrace> {
        self.run_inner(Record::Samples)
    }

    /// Like [`run`](Self::run), also keeping the lifted state at every
    /// instant for the reference oracle.
    pub fn run_recording(&self) -> Result<SimTrace> {
        self.run_inner(Record::Snapshots)
    }

    /// Like [`run`](Self::run) without storing per-instant samples.
    pub fn run_summary(&self) -> Result<RunSummary> {
        Ok(self.run_inner(Record::Nothing)?.summary())
    }

    fn run_inner(&self, record: Record) -> Result<SimTrace> {
        let cfg = &self.config;
        let mats = &*self.mats;
        let layout = mats.layout;
        let init = model::initial_state(&cfg.params)?;
        let mut xt = init.lifted();
        let mut next = vec![0.0; xt.len()];
        let mut tick = 0u64;
        let mut instants = 0usize;

        let mut trace = SimTrace {
            ticks: Vec::new(),
            instants: Vec::new(),
            distances: Vec::new(),
            velocities: Vec::new(),
            d_prime_min: f64::INFINITY,
            d_prime_min_raw: f64::INFINITY,
            k_prime_end: 0,
            stop_reason: StopReason::ReachedTEnd,
            error: None,
            state_snapshots: (record == Record::Snapshots).then(Vec::new),
        };

        loop {
            if let Some(j) = self.grid.comm_index(tick) {
                let u0 = self.schedule.u0_discrete(j, cfg.params.period);
                comms::update_lifted(&mut xt, layout, &cfg.loss, j, u0);
            }

            let d_min = mats.min_distance(&xt);
            trace.d_prime_min_raw = trace.d_prime_min_raw.min(d_min);
            let stopped = (0..=layout.n).all(|i| xt[layout.v(i)] <= cfg.v_stop);
            instants += 1;
            if record != Record::Nothing {
                trace.ticks.push(tick);
                trace.instants.push(self.grid.seconds(tick));
                trace.distances.push(mats.distances(&xt));
                trace.velocities.push(mats.velocities(&xt));
                if let Some(s) = trace.state_snapshots.as_mut() {
                    s.push(xt.clone());
                }
            }

            if d_min <= 0.0 {
                trace.stop_reason = StopReason::Collision;
                break;
            }
            if stopped {
                trace.stop_reason = StopReason::Standstill;
                break;
            }
            if tick >= self.end_tick {
                trace.stop_reason = StopReason::ReachedTEnd;
                break;
            }

            let step = cfg
                .rule
                .raw_step(&xt, mats)
                .and_then(|raw| self.grid.next_instant(tick, raw));
            let next_tick = match step {
                Ok(t) => t,
                Err(e @ Error::Resolution { .. }) => {
                    trace.stop_reason = StopReason::ResolutionError;
                    trace.error = Some(e.to_string());
                    break;
                }
                Err(e) => return Err(e),
            };
            let prop = self.cache.get(next_tick - tick)?;
            prop.apply(&xt, &mut next);
            std::mem::swap(&mut xt, &mut next);
            tick = next_tick;
        }

        trace.k_prime_end = instants - 1;
        trace.d_prime_min = if trace.stop_reason == StopReason::Collision {
            0.0
        } else {
            trace.d_prime_min_raw
        };
        Ok(trace)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Record {
    Nothing,
    Samples,
    Snapshots,
}

/// Scalar outcome of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub d_prime_min: f64,
    pub d_prime_min_raw: f64,
    pub k_prime_end: usize,
    pub stop_reason: StopReason,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl SimTrace {
    pub fn summary(&self) -> RunSummary {
        RunSummary {
            d_prime_min: self.d_prime_min,
            d_prime_min_raw: self.d_prime_min_raw,
            k_prime_end: self.k_prime_end,
            stop_reason: self.stop_reason,
            error: self.error.clone(),
        }
    }
}

/// Validates, assembles and runs `config` once.
pub fn run(config: &SimConfig) -> Result<SimTrace> {
    Simulation::new(config.clone())?.run()
}
