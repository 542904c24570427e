use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::{json, Value};

fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_activated-euler"));
    cmd.env("ACTIVATED_EULER_THREADS", "2");
    cmd
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

/// Number of 2D modes with `max |k_i| <= band`.
fn capacity(grid: usize, eps: f64) -> usize {
    let band = (grid - 1) / if eps > 0.0 { 4 } else { 3 };
    let side = 2 * band + 1;
    side * side - 1
}

fn scenario_on(grid: usize, eps: f64, amplitude: f64, preset: &str) -> Value {
    json!({
        "law": {"kind": "regularized", "m": 1.0, "M": 4.0, "a": 0.25, "n": 10},
        "grid": {"d": 2, "L": std::f64::consts::TAU, "N": grid},
        "solver": {"eps": eps, "t_end": 0.3, "snapshot_every": 0.1, "n": capacity(grid, eps)},
        "initial": {"preset": preset, "amplitude": amplitude, "seed": 3, "band": [1.0, 3.0]}
    })
}

fn scenario(eps: f64, amplitude: f64, preset: &str) -> Value {
    scenario_on(16, eps, amplitude, preset)
}

fn write_config(dir: &Path, name: &str, value: &Value) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, serde_json::to_string_pretty(value).unwrap()).unwrap();
    path
}

fn column(csv: &str, name: &str) -> Vec<f64> {
    let mut lines = csv.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let idx = header.iter().position(|h| *h == name).unwrap();
    lines.map(|l| l.split(',').nth(idx).unwrap().parse().unwrap()).collect()
}

#[test]
fn invalid_activation_ordering_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = scenario(0.0, 0.5, "taylor_green");
    cfg["law"]["m"] = json!(2.5);
    let path = write_config(tmp.path(), "bad.json", &cfg);
    let out = run(&["run", "--config", path.to_str().unwrap(), "--out", tmp.path().join("o").to_str().unwrap()]);
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("0 < m < M - 2"));
}

#[test]
fn unknown_keys_and_bad_usage_are_config_errors() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = scenario(0.0, 0.5, "taylor_green");
    cfg["solver"]["stepper"] = json!("euler");
    let path = write_config(tmp.path(), "bad.json", &cfg);
    assert_eq!(code(&run(&["run", "--config", path.to_str().unwrap(), "--out", "x"])), 1);
    assert_eq!(code(&run(&["run"])), 1);
    assert_eq!(code(&run(&["verify", tmp.path().join("missing").to_str().unwrap()])), 1);
}

#[test]
fn sub_activation_run_is_stress_free_and_verifies() {
    let tmp = tempfile::tempdir().unwrap();
    let path = write_config(tmp.path(), "tg.json", &scenario(0.0, 0.5, "taylor_green"));
    let dir = tmp.path().join("run");
    let out = run(&["run", "--config", path.to_str().unwrap(), "--out", dir.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(dir.join("diagnostics.csv")).unwrap();
    assert!(csv.starts_with(
        "time,kinetic_energy,dissipation_S,dissipation_eps,Dv_max,stress_L1,stress_L2a,activation_fraction"
    ));
    assert!(column(&csv, "dissipation_S").iter().all(|&x| x == 0.0));
    assert!(dir.join("config.json").exists());
    assert!(dir.join("snapshots").join("snap_0000_v0.bin").exists());
    let out = run(&["verify", dir.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stdout));
    assert!(String::from_utf8_lossy(&out.stdout).contains("all checks passed"));
}

fn tamper(dir: &Path) {
    let path = dir.join("diagnostics.csv");
    let csv = fs::read_to_string(&path).unwrap();
    let mut lines = csv.lines();
    let mut text = format!("{}\n", lines.next().unwrap());
    for line in lines {
        let mut cells: Vec<String> = line.split(',').map(str::to_string).collect();
        let e: f64 = cells[1].parse().unwrap();
        cells[1] = format!("{:?}", 2.0 * e);
        text += &cells.join(",");
        text.push('\n');
    }
    fs::write(path, text).unwrap();
}

#[test]
fn activated_run_verifies_and_tampering_is_caught() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = scenario_on(32, 1e-3, 0.99, "random_band");
    let path = write_config(tmp.path(), "act.json", &cfg);
    let dir = tmp.path().join("run");
    let out = run(&["run", "--config", path.to_str().unwrap(), "--out", dir.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(column(&fs::read_to_string(dir.join("diagnostics.csv")).unwrap(), "dissipation_S")
        .iter()
        .any(|&x| x > 0.0));
    assert_eq!(code(&run(&["verify", "--out", dir.to_str().unwrap()])), 0);

    tamper(&dir);
    let out = run(&["verify", dir.to_str().unwrap()]);
    assert_eq!(code(&out), 3);
    let table = String::from_utf8_lossy(&out.stdout).to_string();
    let energy_line = table.lines().find(|l| l.starts_with("energy identity residual")).unwrap();
    assert!(energy_line.ends_with("FAIL"), "{table}");

    // without snapshots the budget check alone still catches it
    let mut no_snap = cfg.clone();
    no_snap["output"] = json!({"snapshots": false});
    let path = write_config(tmp.path(), "nosnap.json", &no_snap);
    let dir = tmp.path().join("run2");
    assert_eq!(code(&run(&["run", "--config", path.to_str().unwrap(), "--out", dir.to_str().unwrap()])), 0);
    tamper(&dir);
    assert_eq!(code(&run(&["verify", dir.to_str().unwrap()])), 3);
}

#[test]
fn runs_are_byte_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    let path = write_config(tmp.path(), "act.json", &scenario(1e-3, 0.9, "random_band"));
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    for dir in [&a, &b] {
        assert_eq!(code(&run(&["run", "--config", path.to_str().unwrap(), "--out", dir.to_str().unwrap()])), 0);
    }
    assert_eq!(fs::read(a.join("diagnostics.csv")).unwrap(), fs::read(b.join("diagnostics.csv")).unwrap());
}

#[test]
fn props_is_deterministic_and_tolerates_zero_samples() {
    let first = run(&["props", "--seed", "7", "--samples", "400"]);
    let second = run(&["props", "--seed", "7", "--samples", "400"]);
    assert_eq!(code(&first), 0, "{}", String::from_utf8_lossy(&first.stdout));
    assert_eq!(first.stdout, second.stdout);
    assert!(String::from_utf8_lossy(&first.stdout).contains("PASS"));

    let empty = run(&["props", "--samples", "0"]);
    assert_eq!(code(&empty), 0);
    assert!(String::from_utf8_lossy(&empty.stderr).contains("warning"));
}

#[test]
fn gronwall_command() {
    let tmp = tempfile::tempdir().unwrap();
    let path = write_config(tmp.path(), "tg.json", &scenario(0.0, 0.5, "taylor_green"));
    let out = run(&["gronwall", "--config", path.to_str().unwrap(), "--scale", "0"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let out_dir = tmp.path().join("g");
    let out =
        run(&["gronwall", "--config", path.to_str().unwrap(), "--scale", "1e-6", "--out", out_dir.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let report: Value = serde_json::from_str(&fs::read_to_string(out_dir.join("gronwall.json")).unwrap()).unwrap();
    assert!(report["y"][0].as_f64().unwrap() > 0.0);
    assert_eq!(code(&run(&["gronwall", "--config", path.to_str().unwrap(), "--scale", "-1"])), 1);
}

#[test]
fn refine_and_sweep_commands() {
    let tmp = tempfile::tempdir().unwrap();
    let path = write_config(tmp.path(), "act.json", &scenario(1e-2, 0.9, "random_band"));
    let out_dir = tmp.path().join("r");
    let out =
        run(&["refine", "--config", path.to_str().unwrap(), "--ladder", "40:1e-2", "--out", out_dir.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(out_dir.join("refine.json").exists());
    assert_eq!(code(&run(&["refine", "--config", path.to_str().unwrap(), "--ladder", "40"])), 1);

    let sweep_dir = tmp.path().join("s");
    let out = run(&[
        "sweep",
        "--config",
        path.to_str().unwrap(),
        "--param",
        "initial.amplitude",
        "--values",
        "0.5,0.9",
        "--out",
        sweep_dir.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let runs = fs::read_dir(&sweep_dir).unwrap().count();
    assert_eq!(runs, 2);
}
