use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use battdispatch_core::dispatch::{BatterySite, Generator, IdealBattery, Node};
use battdispatch_core::{BatteryParams, NetworkCase};
use serde_json::Value;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_battdispatch"));
    c.env("BATTDISPATCH_LOG", "warn");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn battdispatch")
}

fn ok(args: &[&str]) -> Output {
    let out = run(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn read_json(path: impl AsRef<Path>) -> Value {
    serde_json::from_str(&fs::read_to_string(path.as_ref()).unwrap()).unwrap()
}

/// The error document is the last line on stderr, after any log output.
fn error_json(out: &Output) -> Value {
    let text = String::from_utf8_lossy(&out.stderr);
    serde_json::from_str(text.lines().last().unwrap_or_default()).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn shipped(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../testcases").join(name)
}

/// One bus, cheap generation capped at 100 kW and an expensive backstop.
fn toy_case(dir: &Path, demand: &[f64]) -> PathBuf {
    let case = NetworkCase {
        name: "toy".into(),
        base_power_w: 1e5,
        time_step_h: 1.0,
        nodes: vec![Node {
            id: 1,
            angle_min: -1.0,
            angle_max: 1.0,
            reference: true,
        }],
        lines: vec![],
        generators: vec![
            Generator {
                node: 0,
                p_min_w: 0.0,
                p_max_w: 1e5,
                cost_per_wh: 1e-3,
            },
            Generator {
                node: 0,
                p_min_w: 0.0,
                p_max_w: 1e6,
                cost_per_wh: 1e-2,
            },
        ],
        batteries: vec![BatterySite::new(0, BatteryParams::synthetic_default())],
        demand: demand.iter().map(|d| vec![*d]).collect(),
    };
    case.save(dir, &["toy case".into()], None).unwrap()
}

#[test]
fn toy_ideal_dispatch_reports_the_hand_objective() {
    let tmp = tempfile::tempdir().unwrap();
    let case_dir = tmp.path().join("case");
    toy_case(&case_dir, &[0.0, 2e5, 5e4]);
    let out = tmp.path().join("out");
    ok(&["dispatch", "--case", s(&case_dir), "--mode", "ideal", "--out", s(&out)]);

    let half = 5320.0 / 2.0;
    let hand = 1e-3 * half / IdealBattery::DEFAULT_ETA_CHA
        + 1e-3 * 1e5
        + 1e-2 * (1e5 - half * IdealBattery::DEFAULT_ETA_DIS)
        + 1e-3 * 5e4;
    let summary = read_json(out.join("ideal/summary.json"));
    let got = summary["objective"].as_f64().unwrap();
    assert!((got - hand).abs() <= 1e-9 * hand, "{got} vs {hand}");
    let schedule = read_json(out.join("ideal/schedule.json"));
    assert_eq!(schedule["provenance"]["command"], "dispatch");
    let table = fs::read_to_string(out.join("summary.csv")).unwrap();
    let rows: Vec<&str> = table.lines().filter(|l| !l.starts_with('#')).collect();
    assert!(rows[0].starts_with("mode,status"), "{table}");
    assert!(rows[1].starts_with("ideal,optimal"), "{table}");
}

#[test]
fn export_mps_writes_the_model_without_solving() {
    let tmp = tempfile::tempdir().unwrap();
    let case_dir = tmp.path().join("case");
    toy_case(&case_dir, &[1e4, 2e4]);
    let out = tmp.path().join("out");
    ok(&["dispatch", "--case", s(&case_dir), "--mode", "envelope", "--out", s(&out), "--export-mps"]);
    let mps = fs::read_to_string(out.join("envelope/model.mps")).unwrap();
    assert!(mps.contains("ROWS") && mps.contains("COLUMNS") && mps.trim_end().ends_with("ENDATA"));
    assert!(!out.join("envelope/schedule.json").exists());
}

#[test]
fn characterize_is_deterministic_and_accepts_anchor_grids() {
    let tmp = tempfile::tempdir().unwrap();
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    let fast = ["--eval-soc-points", "20", "--eval-power-points", "20"];
    for dir in [&a, &b] {
        let mut args = vec!["characterize", "--out", s(dir)];
        args.extend(fast);
        ok(&args);
    }
    for name in ["envelope_discharge.json", "envelope_charge.json", "error_report.json", "limits.csv"] {
        assert_eq!(fs::read(a.join(name)).unwrap(), fs::read(b.join(name)).unwrap(), "{name}");
    }
    let env = read_json(a.join("envelope_discharge.json"));
    assert_eq!(env["samples"].as_array().unwrap().len(), 14);

    let c = tmp.path().join("c");
    let mut args = vec!["characterize", "--out", s(&c), "--soc-grid", "0,1", "--power-grid", "0"];
    args.extend(fast);
    ok(&args);
    let env = read_json(c.join("envelope_charge.json"));
    assert_eq!(env["samples"].as_array().unwrap().len(), 2);
}

#[test]
fn failures_map_to_exit_codes_with_json_on_stderr() {
    let tmp = tempfile::tempdir().unwrap();
    let missing = tmp.path().join("nope");
    let out = run(&["dispatch", "--case", s(&missing), "--out", s(&tmp.path().join("o"))]);
    assert_eq!(out.status.code(), Some(4));
    let err = error_json(&out);
    assert_eq!(err["exit_code"], 4);

    let case_dir = tmp.path().join("case");
    toy_case(&case_dir, &[1e4, 2e4]);
    let out = run(&[
        "dispatch",
        "--case",
        s(&case_dir),
        "--mode",
        "ideal,envelope",
        "--import-solution",
        "x.csv",
        "--out",
        s(&tmp.path().join("o")),
    ]);
    assert_eq!(out.status.code(), Some(2));

    let big = tmp.path().join("big");
    toy_case(&big, &[1e4, 5e6]);
    let out = run(&["dispatch", "--case", s(&big), "--mode", "ideal", "--out", s(&tmp.path().join("o2"))]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
    let err = error_json(&out);
    assert!(err["message"].as_str().unwrap().contains("infeasible"), "{err}");

    let out = run(&["characterize", "--out", s(&tmp.path().join("o3")), "--soc-grid", "0,1.5"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn reliability_flags_the_stressed_ideal_schedule() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let case = shipped("rts24-stressed");
    ok(&["dispatch", "--case", s(&case), "--mode", "ideal", "--out", s(&out)]);
    ok(&["reliability", "--schedule", s(&out.join("ideal"))]);
    let rep = read_json(out.join("ideal/realization_0.json"));
    assert!(rep["clipped_steps"].as_u64().unwrap() > 0);
    assert!(rep["imbalance_fraction"].as_f64().unwrap() >= 0.10);
    assert!(out.join("ideal/reliability.csv").exists());
}

#[test]
fn empty_horizon_schedule_has_zero_imbalance() {
    let tmp = tempfile::tempdir().unwrap();
    let case_dir = tmp.path().join("case");
    toy_case(&case_dir, &[0.0, 2e5, 5e4]);
    let out = tmp.path().join("out");
    ok(&["dispatch", "--case", s(&case_dir), "--mode", "ideal", "--out", s(&out)]);
    let path = out.join("ideal/schedule.json");
    let mut schedule = read_json(&path);
    for key in ["generation_W", "flow_W", "angle_rad"] {
        schedule[key] = Value::Array(vec![]);
    }
    for b in schedule["batteries"].as_array_mut().unwrap() {
        for key in ["p_dis_W", "p_cha_W", "p_out_W", "p_in_W", "energy_Wh", "soc", "dis_weights", "cha_weights"] {
            b[key] = Value::Array(vec![]);
        }
    }
    fs::write(&path, serde_json::to_string(&schedule).unwrap()).unwrap();
    ok(&["reliability", "--schedule", s(&path)]);
    let rep = read_json(out.join("ideal/realization_0.json"));
    assert_eq!(rep["imbalance_fraction"].as_f64(), Some(0.0));
    assert_eq!(rep["imbalance_Wh"].as_f64().or(rep["imbalance_wh"].as_f64()), Some(0.0));
}

#[test]
fn make_testcase_reproduces_the_shipped_cases() {
    let tmp = tempfile::tempdir().unwrap();
    for (dir, stressed) in [("rts24", false), ("rts24-stressed", true)] {
        let out = tmp.path().join(dir);
        let mut args = vec!["make-testcase", "--out", s(&out)];
        if stressed {
            args.push("--stressed");
        }
        ok(&args);
        let made = NetworkCase::load(out.join("case.json")).unwrap();
        let shipped = NetworkCase::load(shipped(dir).join("case.json")).unwrap();
        assert_eq!(made, shipped, "{dir}");
        assert!(fs::read_to_string(out.join("case.json")).unwrap().contains("synthetic"));
    }
}
