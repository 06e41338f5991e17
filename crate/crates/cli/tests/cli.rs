use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::{json, Value};
use tempfile::TempDir;

fn reference() -> Value {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios/default.json");
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn short() -> Value {
    let mut s = reference();
    s["platoon"]["n"] = json!(4);
    s["braking"]["t_brake"] = json!(0.3);
    s["t_end"] = json!(2.0);
    s
}

fn write(dir: &TempDir, name: &str, scenario: &Value) -> PathBuf {
    let path = dir.path().join(name);
    std::fs::write(&path, serde_json::to_string_pretty(scenario).unwrap()).unwrap();
    path
}

fn platoon(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_platoon"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn read_json(path: PathBuf) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn simulate_reference_scenario() {
    let dir = TempDir::new().unwrap();
    let scen = write(&dir, "s.json", &reference());
    let out_dir = dir.path().join("out");
    let out = platoon(&["simulate", s(&scen), "--out", s(&out_dir)]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));

    let summary = read_json(out_dir.join("summary.json"));
    assert!(summary["d_prime_min"].as_f64().unwrap() > 1.0);
    assert!(summary["k_prime_end"].as_u64().unwrap() > 0);
    assert_eq!(summary["stop_reason"], "reached_t_end");
    assert_eq!(summary["certified_interval"]["collision_free"], true);

    let trace = std::fs::read_to_string(out_dir.join("trace.csv")).unwrap();
    let mut lines = trace.lines();
    let header = lines.next().unwrap();
    assert!(header.starts_with("k,t,d_2,"));
    assert!(header.ends_with(",v_8,stop_reason"));
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len() as u64, summary["k_prime_end"].as_u64().unwrap() + 1);
    assert!(rows.last().unwrap().ends_with(",reached_t_end"));
    assert!(rows[0].ends_with(','));
}

#[test]
fn step_rules_agree_on_minimum_distance() {
    let dir = TempDir::new().unwrap();
    let scen = write(&dir, "s.json", &reference());
    let mut d = Vec::new();
    for rule in ["theorem1", "theorem2"] {
        let out_dir = dir.path().join(rule);
        let out = platoon(&["simulate", s(&scen), "--rule", rule, "--out", s(&out_dir)]);
        assert_eq!(code(&out), 0);
        d.push(read_json(out_dir.join("summary.json"))["d_prime_min"].as_f64().unwrap());
    }
    assert!((d[0] - d[1]).abs() <= 0.002, "{d:?}");
}

#[test]
fn malformed_scenarios_exit_1_naming_the_field() {
    let dir = TempDir::new().unwrap();
    let mut off_grid = short();
    off_grid["t_end"] = json!(1.05);
    let mut bad_type = short();
    bad_type["platoon"]["k_d"] = json!("fast");
    let mut underdamped = short();
    underdamped["braking"]["eta"] = json!(0.5);
    for (name, scen, field) in [
        ("a.json", off_grid, "t_end"),
        ("b.json", bad_type, "platoon.k_d"),
        ("c.json", underdamped, "braking.eta"),
    ] {
        let path = write(&dir, name, &scen);
        let out = platoon(&["simulate", s(&path), "--out", s(dir.path())]);
        assert_eq!(code(&out), 1);
        let err = String::from_utf8_lossy(&out.stderr);
        assert!(err.contains(field), "{field}: {err}");
    }
    let missing = dir.path().join("missing.json");
    assert_eq!(code(&platoon(&["simulate", s(&missing), "--out", s(dir.path())])), 1);
    let scen = write(&dir, "ok.json", &short());
    assert_eq!(code(&platoon(&["simulate", s(&scen), "--alpha", "-1", "--out", s(dir.path())])), 1);
    assert_eq!(code(&platoon(&["simulate", s(&scen), "--rule", "theorem3"])), 1);
}

#[test]
fn collision_and_resolution_exit_codes() {
    let dir = TempDir::new().unwrap();
    let mut weak = reference();
    weak["platoon"]["k_d"] = json!(0.3);
    let scen = write(&dir, "weak.json", &weak);
    let out_dir = dir.path().join("weak");
    assert_eq!(code(&platoon(&["simulate", s(&scen), "--out", s(&out_dir)])), 2);
    let summary = read_json(out_dir.join("summary.json"));
    assert_eq!(summary["d_prime_min"], 0.0);
    assert_eq!(summary["stop_reason"], "collision");
    assert_eq!(summary["certified_interval"]["lower"], 0.0);

    let scen = write(&dir, "short.json", &short());
    let out = platoon(&["simulate", s(&scen), "--nbar", "10", "--out", s(dir.path())]);
    assert_eq!(code(&out), 3);
}

#[test]
fn validate_passes_and_catches_corrupted_steps() {
    let dir = TempDir::new().unwrap();
    let scen = write(&dir, "short.json", &short());
    let ok_dir = dir.path().join("ok");
    let out = platoon(&["validate", s(&scen), "--substeps", "200", "--out", s(&ok_dir)]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stdout));
    let report = read_json(ok_dir.join("validation.json"));
    assert_eq!(report["pass"], true);
    assert_eq!(report["violations"], 0);
    assert!(report["max_deviation"].as_f64().unwrap() <= 1.0);

    let rk_dir = dir.path().join("rk4");
    let out = platoon(&[
        "validate", s(&scen), "--substeps", "50", "--integrator", "rk4", "--out", s(&rk_dir),
    ]);
    assert_eq!(code(&out), 0);

    // The admissible step is very conservative for this state, so only a
    // small α with steps stretched to the full communication interval
    // overshoots.
    let bad_dir = dir.path().join("bad");
    let out = platoon(&[
        "validate", s(&scen), "--alpha", "0.01", "--step-scale", "1e5", "--substeps", "200",
        "--out", s(&bad_dir),
    ]);
    assert_eq!(code(&out), 4);
    let report = read_json(bad_dir.join("validation.json"));
    assert_eq!(report["pass"], false);
    assert!(report["violations"].as_u64().unwrap() > 0);
}

#[test]
fn sweep_is_deterministic_and_matches_simulate() {
    let dir = TempDir::new().unwrap();
    let scen = write(&dir, "short.json", &short());
    let mut bodies = Vec::new();
    for (i, threads) in ["1", "2"].iter().enumerate() {
        let out_dir = dir.path().join(format!("sweep{i}"));
        let out = platoon(&[
            "sweep", s(&scen), "--kp", "0.2:0.3:0.05", "--kd", "0.6:0.8:0.1", "--threads", threads,
            "--out", s(&out_dir),
        ]);
        assert_eq!(code(&out), 0);
        bodies.push(std::fs::read_to_string(out_dir.join("sweep.csv")).unwrap());
    }
    assert_eq!(bodies[0], bodies[1]);
    let lines: Vec<&str> = bodies[0].lines().collect();
    assert_eq!(lines[0], "k_p,k_d,d_prime_min,k_prime_end,stop_reason,error");
    assert_eq!(lines.len(), 1 + 3 * 3);

    let cell_dir = dir.path().join("cell");
    platoon(&["sweep", s(&scen), "--kp", "0.25", "--kd", "0.7", "--out", s(&cell_dir)]);
    let cell = std::fs::read_to_string(cell_dir.join("sweep.csv")).unwrap();
    let fields: Vec<&str> = cell.lines().nth(1).unwrap().split(',').collect();

    let mut direct = short();
    direct["platoon"]["k_p"] = json!(0.25);
    direct["platoon"]["k_d"] = json!(0.7);
    let path = write(&dir, "direct.json", &direct);
    let sim_dir = dir.path().join("sim");
    platoon(&["simulate", s(&path), "--out", s(&sim_dir)]);
    let summary = read_json(sim_dir.join("summary.json"));
    assert_eq!(fields[2].parse::<f64>().unwrap(), summary["d_prime_min"].as_f64().unwrap());
    assert_eq!(fields[3].parse::<u64>().unwrap(), summary["k_prime_end"].as_u64().unwrap());
}

#[test]
fn montecarlo_outputs() {
    let dir = TempDir::new().unwrap();
    let scen = write(&dir, "short.json", &short());
    let one = dir.path().join("one");
    let out = platoon(&[
        "montecarlo", s(&scen), "--runs", "1", "--p", "0.8", "--setting", "0.2,1.2", "--out", s(&one),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let hist = std::fs::read_to_string(one.join("histogram_kp0.2_kd1.2.csv")).unwrap();
    let rows: Vec<&str> = hist.lines().skip(1).collect();
    assert_eq!(rows.len(), 1);
    assert!(rows[0].ends_with(",1"));

    let mut bodies = Vec::new();
    for (i, threads) in ["1", "3"].iter().enumerate() {
        let out_dir = dir.path().join(format!("mc{i}"));
        let out = platoon(&[
            "montecarlo", s(&scen), "--runs", "12", "--p", "0.8", "--seed", "99", "--setting", "0.2,1.2",
            "--setting", "0.25,1.2", "--threads", threads, "--out", s(&out_dir),
        ]);
        assert_eq!(code(&out), 0);
        let read = |f: &str| std::fs::read_to_string(out_dir.join(f)).unwrap();
        bodies.push((read("histogram_kp0.25_kd1.2.csv"), read("runs_kp0.2_kd1.2.csv")));
    }
    assert_eq!(bodies[0], bodies[1]);
    assert_eq!(bodies[0].1.lines().count(), 13);

    let no_p = platoon(&["montecarlo", s(&scen), "--runs", "2", "--out", s(dir.path())]);
    assert_eq!(code(&no_p), 1);
}
