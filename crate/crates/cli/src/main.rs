//! `platoon`: single runs, gain sweeps, Monte-Carlo campaigns and oracle
//! validation for the platoon safety simulator.
//!
//! Exit codes: 0 success, 1 malformed input, 2 collision, 3 time grid too
//! coarse, 4 distance bound violated.

mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};

use platoon_core::campaign::{self, CampaignSpec, Range, SweepSpec, DEFAULT_BIN_WIDTH};
use platoon_core::comms::LossModel;
use platoon_core::oracle::{self, Integrator, OracleConfig};
use platoon_core::scenario;
use platoon_core::simulator::{certified_min, SimConfig, Simulation, StopReason};
use platoon_core::stepper::StepRuleKind;
use platoon_core::Error;

const EXIT_MALFORMED: u8 = 1;
const EXIT_COLLISION: u8 = 2;
const EXIT_RESOLUTION: u8 = 3;
const EXIT_VIOLATION: u8 = 4;

#[derive(Parser)]
#[command(name = "platoon", version, about = "Platoon simulation with a guaranteed distance-error bound")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario; writes trace.csv and summary.json.
    Simulate(Common),
    /// Run the scenario over a (k_p, k_d) grid; writes sweep.csv.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// k_p grid as start:stop:step.
        #[arg(long, default_value = "0.2:0.5:0.05", value_parser = parse_range)]
        kp: Range,
        /// k_d grid as start:stop:step.
        #[arg(long, default_value = "0.2:1.3:0.05", value_parser = parse_range)]
        kd: Range,
    },
    /// Seeded runs over a Bernoulli channel; writes a histogram and a per-run
    /// table for every gain setting.
    Montecarlo {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 10_000)]
        runs: u64,
        /// Loss probability; defaults to the scenario's Bernoulli `p`.
        #[arg(long)]
        p: Option<f64>,
        /// Gain setting as k_p,k_d; repeatable. Defaults to the scenario's gains.
        #[arg(long = "setting", value_parser = parse_pair)]
        settings: Vec<(f64, f64)>,
        #[arg(long, default_value_t = DEFAULT_BIN_WIDTH)]
        bin_width: f64,
    },
    /// Re-propagate every interval with a fine reference integrator and
    /// check the distance bound; writes validation.json.
    Validate {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 1000)]
        substeps: usize,
        #[arg(long, value_enum, default_value_t = IntegratorArg::DenseExpm)]
        integrator: IntegratorArg,
    },
}

#[derive(Args)]
struct Common {
    /// Scenario JSON file.
    scenario: PathBuf,
    #[arg(long, value_enum)]
    rule: Option<RuleArg>,
    /// Admissible distance drift per step, m.
    #[arg(long, allow_negative_numbers = true)]
    alpha: Option<f64>,
    /// Ticks per communication interval.
    #[arg(long)]
    nbar: Option<u64>,
    /// Output directory, created if missing.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Worker threads; defaults to the available parallelism.
    #[arg(long)]
    threads: Option<usize>,
    /// Seed of the Bernoulli channel (base seed for `montecarlo`).
    #[arg(long)]
    seed: Option<u64>,
    /// Multiplies every admissible step. Voids the guarantee.
    #[arg(long, hide = true)]
    step_scale: Option<f64>,
}

#[derive(Clone, Copy, ValueEnum)]
enum RuleArg {
    Theorem1,
    Theorem2,
}

#[derive(Clone, Copy, ValueEnum)]
enum IntegratorArg {
    DenseExpm,
    Rk4,
}

fn parse_range(s: &str) -> Result<Range, String> {
    let parts: Vec<&str> = s.split(':').collect();
    let nums = parts
        .iter()
        .map(|p| p.trim().parse::<f64>().map_err(|e| format!("`{p}`: {e}")))
        .collect::<Result<Vec<_>, _>>()?;
    let range = match nums[..] {
        [v] => Range::single(v),
        [start, stop, step] => Range::new(start, stop, step),
        _ => return Err("expected start:stop:step or a single value".into()),
    };
    range.validate("range").map_err(|e| e.to_string())?;
    Ok(range)
}

fn parse_pair(s: &str) -> Result<(f64, f64), String> {
    let (a, b) = s.split_once(',').ok_or("expected k_p,k_d")?;
    let parse = |v: &str| v.trim().parse::<f64>().map_err(|e| format!("`{v}`: {e}"));
    Ok((parse(a)?, parse(b)?))
}

/// Failure carrying its exit code.
struct Failure {
    code: u8,
    error: anyhow::Error,
}

impl From<anyhow::Error> for Failure {
    fn from(error: anyhow::Error) -> Self {
        let code = match error.downcast_ref::<Error>() {
            Some(Error::Scenario { .. } | Error::InvalidParameter { .. }) => EXIT_MALFORMED,
            Some(Error::Resolution { .. }) => EXIT_RESOLUTION,
            _ => EXIT_MALFORMED,
        };
        Self { code, error }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        anyhow::Error::new(e).into()
    }
}

type Outcome = Result<u8, Failure>;

fn main() -> ExitCode {
    // Usage errors share the malformed-input code; clap's default of 2
    // would read as a collision.
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_MALFORMED } else { 0 });
        }
    };
    match run(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}

fn run(command: Command) -> Outcome {
    match command {
        Command::Simulate(common) => simulate(&common),
        Command::Sweep { common, kp, kd } => sweep(&common, SweepSpec { kp, kd }),
        Command::Montecarlo {
            common,
            runs,
            p,
            settings,
            bin_width,
        } => montecarlo(&common, runs, p, settings, bin_width),
        Command::Validate {
            common,
            substeps,
            integrator,
        } => validate(&common, substeps, integrator),
    }
}

/// Scenario with command-line overrides applied, validated.
fn load(common: &Common) -> Result<SimConfig, Failure> {
    let mut cfg = scenario::load(&common.scenario)?;
    if let Some(rule) = common.rule {
        cfg.rule.kind = match rule {
            RuleArg::Theorem1 => StepRuleKind::Theorem1,
            RuleArg::Theorem2 => StepRuleKind::Theorem2,
        };
    }
    if let Some(alpha) = common.alpha {
        cfg.rule.alpha = alpha;
    }
    if let Some(n_bar) = common.nbar {
        cfg.rule.n_bar = n_bar;
    }
    if let Some(scale) = common.step_scale {
        cfg.rule.step_scale = scale;
    }
    if let (Some(seed), LossModel::Bernoulli { seed: s, .. }) = (common.seed, &mut cfg.loss) {
        *s = seed;
    }
    cfg.validate().map_err(|e| {
        Failure::from(Error::Scenario {
            path: match &e {
                Error::InvalidParameter { field, .. } => field.clone(),
                _ => "<root>".into(),
            },
            message: e.to_string(),
        })
    })?;
    if let Some(threads) = common.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .context("cannot configure the worker pool")?;
    }
    std::fs::create_dir_all(&common.out)
        .with_context(|| format!("cannot create {}", common.out.display()))?;
    Ok(cfg)
}

fn out_file(common: &Common, name: &str) -> PathBuf {
    common.out.join(name)
}

fn simulate(common: &Common) -> Outcome {
    let cfg = load(common)?;
    let trace = Simulation::new(cfg.clone())?.run()?;
    output::write_trace(&out_file(common, "trace.csv"), &trace)?;
    let summary = output::TraceSummary {
        d_prime_min: trace.d_prime_min,
        k_prime_end: trace.k_prime_end,
        stop_reason: trace.stop_reason,
        certified_interval: certified_min(&trace, cfg.rule.alpha),
        error: trace.error.clone(),
    };
    output::write_json(&out_file(common, "summary.json"), &summary)?;
    println!(
        "d'_min = {} m, k'_end = {}, stop = {}",
        trace.d_prime_min, trace.k_prime_end, trace.stop_reason
    );
    Ok(exit_for(trace.stop_reason))
}

fn exit_for(stop: StopReason) -> u8 {
    match stop {
        StopReason::ReachedTEnd | StopReason::Standstill => 0,
        StopReason::Collision => EXIT_COLLISION,
        StopReason::ResolutionError => EXIT_RESOLUTION,
    }
}

fn sweep(common: &Common, spec: SweepSpec) -> Outcome {
    let cfg = load(common)?;
    let rows = campaign::sweep(&cfg, &spec)?;
    output::write_sweep(&out_file(common, "sweep.csv"), &rows)?;
    let total: usize = rows.iter().filter_map(|r| r.k_prime_end()).sum();
    let collisions = rows
        .iter()
        .filter(|r| r.stop_reason() == Some(StopReason::Collision))
        .count();
    println!(
        "{} points, {} collisions, total k'_end = {}",
        rows.len(),
        collisions,
        total
    );
    Ok(0)
}

fn montecarlo(
    common: &Common,
    runs: u64,
    p: Option<f64>,
    settings: Vec<(f64, f64)>,
    bin_width: f64,
) -> Outcome {
    let cfg = load(common)?;
    let (scenario_p, scenario_seed) = match cfg.loss {
        LossModel::Bernoulli { p, seed } => (Some(p), seed),
        LossModel::Consecutive { .. } => (None, 0),
    };
    let p = p.or(scenario_p).ok_or_else(|| {
        Failure::from(Error::Scenario {
            path: "loss".into(),
            message: "montecarlo needs --p or a bernoulli loss model".into(),
        })
    })?;
    let spec = CampaignSpec {
        runs,
        base_seed: common.seed.unwrap_or(scenario_seed),
        p,
        settings: if settings.is_empty() {
            vec![(cfg.params.k_p, cfg.params.k_d)]
        } else {
            settings
        },
        bin_width,
    };
    let results = campaign::montecarlo(&cfg, &spec)?;
    for res in &results {
        let tag = format!("kp{}_kd{}", res.k_p, res.k_d);
        output::write_histogram(&out_file(common, &format!("histogram_{tag}.csv")), &res.histogram)?;
        output::write_runs(&out_file(common, &format!("runs_{tag}.csv")), &res.runs)?;
        let collisions = res
            .runs
            .iter()
            .filter(|r| r.summary.stop_reason == StopReason::Collision)
            .count();
        let min = res.d_prime_mins().into_iter().fold(f64::INFINITY, f64::min);
        println!(
            "k_p = {}, k_d = {}: {} runs, {} collisions, smallest d'_min = {} m",
            res.k_p,
            res.k_d,
            res.runs.len(),
            collisions,
            min
        );
    }
    Ok(0)
}

fn validate(common: &Common, substeps: usize, integrator: IntegratorArg) -> Outcome {
    let cfg = load(common)?;
    let oracle = OracleConfig {
        substeps,
        integrator: match integrator {
            IntegratorArg::DenseExpm => Integrator::DenseExpm,
            IntegratorArg::Rk4 => Integrator::Rk4,
        },
    };
    oracle.validate()?;
    let report = oracle::validate(&cfg, &oracle)?;
    output::write_json(&out_file(common, "validation.json"), &report)?;
    println!(
        "{} intervals, max deviation {} m (alpha {} m), {} violations, certificate {}",
        report.intervals,
        report.max_deviation,
        report.alpha,
        report.violations,
        if report.certificate_sound { "sound" } else { "UNSOUND" }
    );
    if !report.pass {
        return Ok(EXIT_VIOLATION);
    }
    Ok(match report.stop_reason {
        StopReason::ResolutionError => EXIT_RESOLUTION,
        _ => 0,
    })
}
