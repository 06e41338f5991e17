//! Fine-grained reference integration used to check the step rules.
//!
//! Each simulated interval is re-propagated from its recorded starting state
//! at `substeps` points, either by a per-substep matrix exponential or by
//! classical RK4 on the sparse generator. The RK4 path shares no code with
//! the simulator beyond the assembled matrices.

use std::collections::hash_map::{Entry, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, Matrix};
use crate::model::{self, PlatoonMatrices};
use crate::simulator::{certified_min, CertifiedInterval, SimConfig, SimTrace, Simulation, StopReason};
use crate::stepper::StepRuleKind;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Integrator {
    DenseExpm,
    Rk4,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct OracleConfig {
    pub substeps: usize,
    pub integrator: Integrator,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self {
            substeps: 1000,
            integrator: Integrator::DenseExpm,
        }
    }
}

impl OracleConfig {
    pub fn validate(&self) -> Result<()> {
        if self.substeps < 10 {
            return Err(Error::param("substeps", format!("must be >= 10, got {}", self.substeps)));
        }
        Ok(())
    }
}

/// Row-compressed copy of a matrix.
struct Sparse {
    row_start: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl Sparse {
    fn new(m: &Matrix) -> Self {
        let mut row_start = vec![0];
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        for i in 0..m.rows() {
            for (j, &v) in m.row(i).iter().enumerate() {
                if v != 0.0 {
                    cols.push(j);
                    vals.push(v);
                }
            }
            row_start.push(cols.len());
        }
        Self { row_start, cols, vals }
    }

    fn apply(&self, x: &[f64], out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate() {
            let (lo, hi) = (self.row_start[i], self.row_start[i + 1]);
            *o = self.cols[lo..hi]
                .iter()
                .zip(&self.vals[lo..hi])
                .map(|(&j, &v)| v * x[j])
                .sum();
        }
    }
}

struct Rk4 {
    a: Sparse,
    k: [Vec<f64>; 4],
    tmp: Vec<f64>,
}

impl Rk4 {
    fn new(a: &Matrix) -> Self {
        let d = a.rows();
        Self {
            a: Sparse::new(a),
            k: std::array::from_fn(|_| vec![0.0; d]),
            tmp: vec![0.0; d],
        }
    }

    fn step(&mut self, x: &mut [f64], h: f64) {
        let [k1, k2, k3, k4] = &mut self.k;
        self.a.apply(x, k1);
        for ((t, xi), k) in self.tmp.iter_mut().zip(x.iter()).zip(k1.iter()) {
            *t = xi + 0.5 * h * k;
        }
        self.a.apply(&self.tmp, k2);
        for ((t, xi), k) in self.tmp.iter_mut().zip(x.iter()).zip(k2.iter()) {
            *t = xi + 0.5 * h * k;
        }
        self.a.apply(&self.tmp, k3);
        for ((t, xi), k) in self.tmp.iter_mut().zip(x.iter()).zip(k3.iter()) {
            *t = xi + h * k;
        }
        self.a.apply(&self.tmp, k4);
        for (i, xi) in x.iter_mut().enumerate() {
            *xi += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
    }
}

/// Classical RK4 integration of `x̃̇ = Ãx̃` over `dt_total` in `substeps`
/// equal steps.
pub fn rk4_reference(
    x_tilde0: &[f64],
    dt_total: f64,
    substeps: usize,
    mats: &PlatoonMatrices,
) -> Result<Vec<f64>> {
    if substeps < 10 {
        return Err(Error::param("substeps", format!("must be >= 10, got {substeps}")));
    }
    if x_tilde0.len() != mats.a_tilde.rows() {
        return Err(Error::Dimension(format!(
            "state of length {} for a {}-dimensional system",
            x_tilde0.len(),
            mats.a_tilde.rows()
        )));
    }
    let mut rk = Rk4::new(&mats.a_tilde);
    let mut x = x_tilde0.to_vec();
    let h = dt_total / substeps as f64;
    for _ in 0..substeps {
        rk.step(&mut x, h);
    }
    Ok(x)
}

/// Oracle view of a finished trace.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseDistances {
    /// `max_i max_t |d_i(t) − d_i(t_k)|` for every completed interval `k`.
    pub per_interval: Vec<f64>,
    /// Smallest distance over instants and substeps, clamped at 0.
    pub oracle_min: f64,
    /// Largest relative gap between an interval's re-propagated endpoint and
    /// the simulator's state at the next instant (physical block only).
    pub endpoint_mismatch: f64,
}

/// Re-propagates every interval of `trace`, which must come from
/// [`Simulation::run_recording`] on `config`.
pub fn dense_distances(
    config: &SimConfig,
    trace: &SimTrace,
    oracle: &OracleConfig,
) -> Result<DenseDistances> {
    oracle.validate()?;
    let mats = model::assemble(&config.params)?;
    let snaps = check_trace(config, trace, &mats)?;
    let nx = mats.layout.state_dim();
    let dim = mats.layout.lifted_dim();
    let subs = oracle.substeps;

    let mut sub_expm: HashMap<u64, Sparse> = HashMap::new();
    let mut rk = Rk4::new(&mats.a_tilde);
    let mut x = vec![0.0; dim];
    let mut y = vec![0.0; dim];
    // Distances straight from positions, independent of the selectors.
    let layout = mats.layout;
    let gaps: Vec<(usize, usize, f64)> = (2..=layout.n)
        .map(|i| (layout.p(i - 1), layout.p(i), config.params.length_of(i)))
        .collect();

    let mut per_interval = Vec::with_capacity(snaps.len().saturating_sub(1));
    let mut oracle_min = trace
        .distances
        .iter()
        .flatten()
        .copied()
        .fold(f64::INFINITY, f64::min);
    let mut endpoint_mismatch: f64 = 0.0;

    for k in 0..snaps.len() - 1 {
        let dt = trace.instants[k + 1] - trace.instants[k];
        let h = dt / subs as f64;
        let d0 = &trace.distances[k];
        x.copy_from_slice(&snaps[k]);
        let e = match oracle.integrator {
            Integrator::DenseExpm => {
                let key = trace.ticks[k + 1] - trace.ticks[k];
                Some(match sub_expm.entry(key) {
                    Entry::Occupied(o) => o.into_mut(),
                    Entry::Vacant(v) => v.insert(Sparse::new(&linalg::expm(&mats.a_tilde, h)?)),
                })
            }
            Integrator::Rk4 => None,
        };
        let mut worst: f64 = 0.0;
        for _ in 0..subs {
            match e {
                Some(ref e) => {
                    e.apply(&x, &mut y);
                    std::mem::swap(&mut x, &mut y);
                }
                None => rk.step(&mut x, h),
            }
            for (&(front, back, len), d_k) in gaps.iter().zip(d0) {
                let d = x[front] - x[back] - len;
                worst = worst.max((d - d_k).abs());
                oracle_min = oracle_min.min(d);
            }
        }
        let next = &snaps[k + 1][..nx];
        let gap = linalg::norm2(
            &x[..nx].iter().zip(next).map(|(a, b)| a - b).collect::<Vec<_>>(),
        );
        endpoint_mismatch = endpoint_mismatch.max(gap / linalg::norm2(next).max(1.0));
        per_interval.push(worst);
    }

    Ok(DenseDistances {
        per_interval,
        oracle_min: oracle_min.max(0.0),
        endpoint_mismatch,
    })
}

fn check_trace<'t>(
    config: &SimConfig,
    trace: &'t SimTrace,
    mats: &PlatoonMatrices,
) -> Result<&'t [Vec<f64>]> {
    let snaps = trace
        .state_snapshots
        .as_deref()
        .ok_or_else(|| Error::Validation("trace carries no state snapshots".into()))?;
    let len = trace.ticks.len();
    if len == 0
        || snaps.len() != len
        || trace.instants.len() != len
        || trace.distances.len() != len
        || trace.k_prime_end + 1 != len
    {
        return Err(Error::Validation("trace arrays have inconsistent lengths".into()));
    }
    let dim = mats.layout.lifted_dim();
    if snaps.iter().any(|s| s.len() != dim) {
        return Err(Error::Validation(format!(
            "snapshots are not {dim}-dimensional lifted states of an n = {} platoon",
            config.params.n
        )));
    }
    let init = model::initial_state(&config.params)?;
    let nx = mats.layout.state_dim();
    if snaps[0][..nx] != init.x[..] || trace.instants[0] != 0.0 {
        return Err(Error::Validation(
            "trace does not start from the configuration's initial state".into(),
        ));
    }
    Ok(snaps)
}

/// Outcome of checking one run against the oracle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub rule: StepRuleKind,
    pub alpha: f64,
    pub substeps: usize,
    pub integrator: Integrator,
    pub intervals: usize,
    pub max_deviation: f64,
    /// Index of the interval attaining `max_deviation`.
    pub worst_interval: Option<usize>,
    /// Intervals whose deviation exceeds `α`.
    pub violations: usize,
    pub d_prime_min: f64,
    pub certified_interval: CertifiedInterval,
    pub oracle_min: f64,
    pub certificate_sound: bool,
    pub endpoint_mismatch: f64,
    pub k_prime_end: usize,
    pub stop_reason: StopReason,
    pub pass: bool,
}

/// Runs `config` with snapshots and checks every interval against the
/// oracle.
pub fn validate(config: &SimConfig, oracle: &OracleConfig) -> Result<ValidationReport> {
    let sim = Simulation::new(config.clone())?;
    let trace = sim.run_recording()?;
    validate_trace(config, &trace, oracle)
}

pub fn validate_trace(
    config: &SimConfig,
    trace: &SimTrace,
    oracle: &OracleConfig,
) -> Result<ValidationReport> {
    let dense = dense_distances(config, trace, oracle)?;
    let alpha = config.rule.alpha;
    let (worst_interval, max_deviation) = dense
        .per_interval
        .iter()
        .copied()
        .enumerate()
        .fold((None, 0.0), |(wi, wv), (i, v)| if v > wv { (Some(i), v) } else { (wi, wv) });
    let violations = dense.per_interval.iter().filter(|&&v| v > alpha).count();
    let cert = certified_min(trace, alpha);
    let certificate_sound = cert.lower <= dense.oracle_min && dense.oracle_min <= cert.upper;
    Ok(ValidationReport {
        rule: config.rule.kind,
        alpha,
        substeps: oracle.substeps,
        integrator: oracle.integrator,
        intervals: dense.per_interval.len(),
        max_deviation,
        worst_interval,
        violations,
        d_prime_min: trace.d_prime_min,
        certified_interval: cert,
        oracle_min: dense.oracle_min,
        certificate_sound,
        endpoint_mismatch: dense.endpoint_mismatch,
        k_prime_end: trace.k_prime_end,
        stop_reason: trace.stop_reason,
        pass: violations == 0 && certificate_sound,
    })
}
