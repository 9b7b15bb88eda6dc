use std::path::Path;
use std::process::Command;

use stns_cli::commands::{self, initial_field};
use stns_cli::io::{read_records, read_snapshot};
use stns_cli::RunConfig;
use stns_core::diagnostics::EnergyRecord;
use stns_core::solver::Stepper;

const SMALL: &str = "grid.modes = 16\nstepper.horizon = 0.05\nstepper.dt = 0.01\n";

fn parse(extra: &str) -> RunConfig {
    let base = if extra.contains("stepper.horizon") {
        SMALL.replace("stepper.horizon = 0.05\n", "")
    } else {
        SMALL.to_string()
    };
    RunConfig::parse(&format!("{base}{extra}")).unwrap()
}

fn config(extra: &str) -> RunConfig {
    let cfg = parse(extra);
    cfg.validate().unwrap();
    cfg
}

fn snapshots(dir: &Path) -> Vec<String> {
    let mut names: Vec<String> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .filter(|n| n.ends_with(".stns"))
        .collect();
    names.sort();
    names
}

#[test]
fn zero_horizon_writes_one_record_and_one_snapshot() {
    let cfg = config("stepper.horizon = 0");
    let dir = tempfile::tempdir().unwrap();
    let mut out = Vec::new();
    assert!(commands::simulate(&cfg, dir.path(), &mut out).unwrap());
    assert_eq!(read_records(&dir.path().join("records.ndjson")).unwrap().len(), 1);
    assert_eq!(snapshots(dir.path()), vec!["snapshot_000000.stns"]);
}

#[test]
fn snapshots_reproduce_recorded_diagnostics() {
    let cfg = config("output.snapshot_stride = 2");
    let dir = tempfile::tempdir().unwrap();
    commands::simulate(&cfg, dir.path(), &mut Vec::new()).unwrap();
    let records = read_records(&dir.path().join("records.ndjson")).unwrap();
    let names = snapshots(dir.path());
    assert_eq!(names.len(), 4, "{names:?}");

    let stepper = Stepper::new(cfg.stepper().unwrap(), cfg.grid_spec().unwrap()).unwrap();
    for name in names {
        let snap = read_snapshot(&dir.path().join(&name)).unwrap();
        let rec: &EnergyRecord = records.iter().find(|r| r.t == snap.t).expect("record at snapshot time");
        let mut u = snap.field.to_spectral();
        u.symmetrize();
        let mut state = stepper.initial_state(u, stns_core::rng::RngStreams::new(0, 0)).unwrap();
        state.t = snap.t;
        let again = stepper.record(&mut state);
        for (a, b) in [
            (rec.lp_p, again.lp_p),
            (rec.l2_sq, again.l2_sq),
            (rec.grad_l2_sq, again.grad_l2_sq),
            (rec.pressure_l3, again.pressure_l3),
        ] {
            assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0), "{name}: {a} vs {b}");
        }
    }
}

#[test]
fn single_path_ensemble_has_zero_standard_error() {
    let cfg = config("mc.paths = 1");
    let dir = tempfile::tempdir().unwrap();
    commands::mc(&cfg, dir.path(), &mut Vec::new()).unwrap();
    let summary: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("summary.json")).unwrap()).unwrap();
    let entries = summary["estimate"]["entries"].as_array().unwrap();
    assert!(!entries.is_empty());
    assert!(entries.iter().all(|e| e["se"].as_f64() == Some(0.0)));
    assert!(dir.path().join("paths/records_0000.ndjson").exists());
}

#[test]
fn merged_records_carry_path_index() {
    let cfg = config("mc.paths = 3\nstepper.horizon = 0.02");
    let dir = tempfile::tempdir().unwrap();
    commands::mc(&cfg, dir.path(), &mut Vec::new()).unwrap();
    let text = std::fs::read_to_string(dir.path().join("records.ndjson")).unwrap();
    let paths: Vec<u64> = text
        .lines()
        .map(|l| {
            serde_json::from_str::<serde_json::Value>(l).unwrap()["path"]
                .as_u64()
                .unwrap()
        })
        .collect();
    assert_eq!(paths, vec![0, 0, 0, 1, 1, 1, 2, 2, 2]);
}

#[test]
fn heat_with_mean_forcing_runs() {
    let cfg = config("heat.q_f = 3\nheat.q_h = 2\nheat.h_mean = 0.1, 0, 0\ninit.kind = zero");
    let dir = tempfile::tempdir().unwrap();
    assert!(commands::heat(&cfg, dir.path(), &mut Vec::new()).unwrap());
    let recs = read_records(&dir.path().join("records.ndjson")).unwrap();
    assert_eq!(recs.len(), 6);
    assert!(recs.last().unwrap().l2_sq > 0.0);
}

#[test]
fn heat_rejects_missing_exponents() {
    let err = RunConfig::parse(&format!("{SMALL}heat.h_mean = 0.1, 0, 0")).unwrap_err();
    assert!(err.to_string().contains("heat.q_f"), "{err}");
}

#[test]
fn initial_field_kinds() {
    let g = config("").grid_spec().unwrap();
    let zero = initial_field(&config("init.kind = zero"), g);
    assert_eq!(zero.max_abs(), 0.0);
    let c = initial_field(&config("init.kind = constant\ninit.value = 1, 2, 3"), g);
    assert_eq!(c.at(17), [1.0, 2.0, 3.0]);
    let a = initial_field(&config("init.seed = 4"), g);
    let b = initial_field(&config("init.seed = 4"), g);
    assert_eq!(a, b);
}

fn stns(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_stns")).args(args).output().unwrap()
}

#[test]
fn binary_echoes_config_first_and_reports_range_errors() {
    let dir = tempfile::tempdir().unwrap();
    let conf = dir.path().join("a.conf");
    std::fs::write(&conf, SMALL).unwrap();
    let out_dir = dir.path().join("out");
    let o = stns(&[
        "simulate",
        "--config",
        conf.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let stdout = String::from_utf8(o.stdout).unwrap();
    let first: serde_json::Value = serde_json::from_str(stdout.lines().next().unwrap()).unwrap();
    assert_eq!(first["grid"]["modes"], 16);
    assert!(out_dir.join("summary.json").exists());

    std::fs::write(&conf, "physics.p = 2.5\n").unwrap();
    let o = stns(&["simulate", "--config", conf.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("p must exceed 3"));
}
