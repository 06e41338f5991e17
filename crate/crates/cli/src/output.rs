//! CSV and JSON writers. Floats use the shortest round-trip form, so reruns
//! produce byte-identical files.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use anyhow::{Context, Result};
use serde::Serialize;

use platoon_core::campaign::{CampaignRun, Histogram, SweepRow};
use platoon_core::simulator::{CertifiedInterval, SimTrace, StopReason};

#[derive(Serialize)]
pub struct TraceSummary {
    pub d_prime_min: f64,
    pub k_prime_end: usize,
    pub stop_reason: StopReason,
    pub certified_interval: CertifiedInterval,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

fn csv_writer(path: &Path) -> Result<csv::Writer<BufWriter<File>>> {
    let file = File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
    Ok(csv::Writer::from_writer(BufWriter::new(file)))
}

/// One row per instant; `stop_reason` is filled on the last row only.
pub fn write_trace(path: &Path, trace: &SimTrace) -> Result<()> {
    let mut w = csv_writer(path)?;
    let n_d = trace.distances.first().map_or(0, Vec::len);
    let mut header = vec!["k".to_string(), "t".to_string()];
    header.extend((0..n_d).map(|i| format!("d_{}", i + 2)));
    header.extend((0..=n_d + 1).map(|i| format!("v_{i}")));
    header.push("stop_reason".into());
    w.write_record(&header)?;
    let last = trace.ticks.len().saturating_sub(1);
    for k in 0..trace.ticks.len() {
        let mut rec = vec![k.to_string(), trace.instants[k].to_string()];
        rec.extend(trace.distances[k].iter().map(f64::to_string));
        rec.extend(trace.velocities[k].iter().map(f64::to_string));
        rec.push(if k == last { trace.stop_reason.to_string() } else { String::new() });
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_sweep(path: &Path, rows: &[SweepRow]) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(["k_p", "k_d", "d_prime_min", "k_prime_end", "stop_reason", "error"])?;
    for row in rows {
        let opt = |v: Option<String>| v.unwrap_or_default();
        w.write_record([
            row.k_p.to_string(),
            row.k_d.to_string(),
            opt(row.d_prime_min().map(|v| v.to_string())),
            opt(row.k_prime_end().map(|v| v.to_string())),
            opt(row.stop_reason().map(|v| v.to_string())),
            opt(row.error.clone()),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_histogram(path: &Path, hist: &Histogram) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(["bin_lo", "bin_hi", "count"])?;
    for b in &hist.bins {
        w.write_record([b.lo.to_string(), b.hi.to_string(), b.count.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_runs(path: &Path, runs: &[CampaignRun]) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(["run", "seed", "d_prime_min", "k_prime_end", "stop_reason"])?;
    for r in runs {
        w.write_record([
            r.run.to_string(),
            r.seed.to_string(),
            r.summary.d_prime_min.to_string(),
            r.summary.k_prime_end.to_string(),
            r.summary.stop_reason.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let file = File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
    let mut out = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    out.flush()?;
    Ok(())
}
