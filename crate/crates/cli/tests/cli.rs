use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn run(args: &[&str], config: &str, dir: &TempDir) -> (Output, PathBuf) {
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, config).unwrap();
    let out = dir.path().join("out");
    let output = Command::new(env!("CARGO_BIN_EXE_delta-lab"))
        .args(args)
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap();
    (output, out)
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap_or(-1)
}

const SMALL_GRID: &str = "
[grid]
window = 40.0
space_nodes = 2048
charge_nodes = 257
snapshots = 3
";

#[test]
fn free_solve_conserves_mass() {
    let dir = TempDir::new().unwrap();
    let config = format!("[coupling]\nkind = \"zero\"\n[solver]\nroute = \"both\"\n{SMALL_GRID}");
    let (o, out) = run(&["solve"], &config, &dir);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let d = read_json(&out.join("diagnostics.json"));
    for route in ["fourier", "duhamel"] {
        assert!(d["routes"][route]["mass_drift"].as_f64().unwrap() <= 1e-10);
    }
    assert!(d["route_distance"].as_f64().unwrap() <= 1e-10);
    assert!(out.join("q.csv").is_file());
    assert!(out.join("snapshots/fourier_002.csv").is_file());
    assert!(out.join("snapshots/duhamel_000.csv").is_file());
}

#[test]
fn bound_state_solve_satisfies_the_jump_condition() {
    let dir = TempDir::new().unwrap();
    let config = "
[initial]
kind = \"bound_state\"
[grid]
charge_nodes = 257
snapshots = 3
";
    let (o, out) = run(&["solve", "--strict"], config, &dir);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let d = read_json(&out.join("diagnostics.json"));
    assert!(d["routes"]["fourier"]["max_jump_residual"].as_f64().unwrap() <= 1e-3);
}

#[test]
fn malformed_config_exits_2_without_artifacts() {
    let dir = TempDir::new().unwrap();
    let (o, out) = run(&["solve"], "[grid]\nspace_node = 1024\n", &dir);
    assert_eq!(code(&o), 2);
    assert!(!out.exists());
    let (o, out) = run(&["solve"], "[grid]\nspace_nodes = 1000\n", &dir);
    assert_eq!(code(&o), 2);
    assert!(!out.exists());
}

#[test]
fn empty_sweep_list_exits_2() {
    let dir = TempDir::new().unwrap();
    let (o, out) = run(&["sweep"], "[sweep]\ncharge_nodes = []\n", &dir);
    assert_eq!(code(&o), 2);
    assert!(!out.exists());
}

#[test]
fn numerical_failure_exits_3_with_error_json() {
    let dir = TempDir::new().unwrap();
    let config = format!(
        "[coupling]\nkind = \"constant\"\nvalue = -400.0\n[solver]\nmethod = \"picard\"\nmin_window = 0.5\n{SMALL_GRID}"
    );
    let (o, out) = run(&["solve"], &config, &dir);
    assert_eq!(code(&o), 3);
    let e = read_json(&out.join("error.json"));
    assert_eq!(e["error"]["kind"], "Stiffness");
    assert_eq!(e["error"]["stage"], "charge");
    assert_eq!(e["config_hash"].as_str().unwrap().len(), 64);
}

#[test]
fn artifacts_are_deterministic_and_carry_the_hash() {
    let dir = TempDir::new().unwrap();
    let config = format!("[coupling]\nkind = \"synthesized\"\nnu = 0.8\nsamples = 4096\n{SMALL_GRID}");
    let (o, out) = run(&["solve", "--seed", "11"], &config, &dir);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let first = std::fs::read(out.join("diagnostics.json")).unwrap();
    let mut telemetry = read_json(&out.join("telemetry.json"));
    let hash = telemetry["config_hash"].as_str().unwrap().to_string();
    let mut files = vec![out.join("q.csv"), out.join("diagnostics.json"), out.join("config.json")];
    files.extend(std::fs::read_dir(out.join("snapshots")).unwrap().map(|e| e.unwrap().path()));
    for f in &files {
        assert!(std::fs::read_to_string(f).unwrap().contains(&hash), "{}", f.display());
    }
    let (o, out) = run(&["solve", "--seed", "11"], &config, &dir);
    assert_eq!(code(&o), 0);
    assert_eq!(std::fs::read(out.join("diagnostics.json")).unwrap(), first);
    let mut again = read_json(&out.join("telemetry.json"));
    telemetry.as_object_mut().unwrap().remove("timestamp");
    again.as_object_mut().unwrap().remove("timestamp");
    assert_eq!(telemetry, again);
    let (_, out) = run(&["solve", "--seed", "12"], &config, &dir);
    assert_ne!(read_json(&out.join("telemetry.json"))["config_hash"].as_str().unwrap(), hash);
}

#[test]
fn sweep_reports_charge_convergence() {
    let dir = TempDir::new().unwrap();
    let config = "
[coupling]
kind = \"constant\"
value = -2.0
[grid]
window = 40.0
space_nodes = 2048
charge_nodes = 257
snapshots = 3
[sweep]
charge_nodes = [129, 257, 513, 1025]
space_nodes = [2048, 4096]
route_agreement = false
";
    let (o, out) = run(&["sweep"], config, &dir);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let s = read_json(&out.join("sweep.json"));
    let orders = s["charge"]["orders"].as_array().unwrap();
    assert_eq!(orders.len(), 2);
    let orders: Vec<f64> = orders.iter().map(|o| o.as_f64().unwrap()).collect();
    assert!(orders[0] >= 1.4 && orders[1] >= orders[0], "{orders:?}");
    assert!(s["jump_orders"][0].as_f64().unwrap() >= 1.0);
    let table = std::fs::read_to_string(out.join("charge_convergence.csv")).unwrap();
    assert_eq!(table.lines().count(), 6);
    assert!(out.join("sweep/charge/q_n1025.csv").is_file());
    assert!(out.join("sweep/space/point_n4096.json").is_file());
}

#[test]
fn lemmas_reproduce_the_scaling_laws() {
    let dir = TempDir::new().unwrap();
    let config = "
[lemmas]
cutoff_nu = [0.25]
dilation_mu = [0.25]
samples = 4
nodes = 512
";
    let (o, out) = run(&["lemmas"], config, &dir);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let l = read_json(&out.join("lemmas.json"));
    let cutoff = &l["cutoff"][0];
    assert!((cutoff["fitted_exponent"].as_f64().unwrap() - 0.25).abs() <= 0.05);
    for r in l["cutoff"].as_array().unwrap().iter().chain(l["dilation"].as_array().unwrap()) {
        assert!(r["r_squared"].as_f64().unwrap() >= 0.98);
    }
    for (_, v) in l["unity_residual"].as_object().unwrap() {
        assert!(v.as_f64().unwrap() <= 1e-10);
    }
    assert_eq!(l["product_laws"].as_array().unwrap().len(), 3);
    assert!(out.join("lemmas/cutoff_nu0.25.csv").is_file());
}

#[test]
fn verify_passes_on_a_free_problem() {
    let dir = TempDir::new().unwrap();
    let config = format!("[coupling]\nkind = \"zero\"\n[verify]\ncriteria = [6]\n{SMALL_GRID}");
    let (o, out) = run(&["verify"], &config, &dir);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let v = read_json(&out.join("verify.json"));
    assert_eq!(v["passed"], true);
    assert_eq!(v["criteria"][0]["id"], 6);
    assert!(String::from_utf8_lossy(&o.stdout).contains("cutoff_scaling"));
}

#[test]
fn verify_fails_when_the_problem_fails() {
    let dir = TempDir::new().unwrap();
    // Gaussian data leave a small window before t = 1
    let config = "
[coupling]
kind = \"zero\"
[initial]
kind = \"gaussian\"
center = 8.0
momentum = 8.0
[grid]
window = 20.0
space_nodes = 1024
charge_nodes = 129
[verify]
criteria = []
";
    let (o, out) = run(&["verify"], config, &dir);
    assert_eq!(code(&o), 3);
    assert!(out.join("error.json").is_file());
}
