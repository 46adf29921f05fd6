use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

const SOLITON: &str = r#"
[grid]
n_points = 512
domain_length = 60.0

[data]
kind = "soliton"

[run]
sign = "focusing"
dt = 1e-3
t_final = 1.0
record_stride = 250
beta_kappas = [1.0, 4.0]
"#;

const GAUSSIAN: &str = r#"
[grid]
n_points = 2048
domain_length = 100.0

[data]
kind = "gaussian"
k0 = 6.0
width = 1.5

[run]
sign = "defocusing"
dt = 1e-3
t_final = 0.5
record_stride = 100

[compare]
times = [0.5]
heights = [1.0]
bound = 1e-4
"#;

fn ccm(dir: &Path, cmd: &str, config: &str, sets: &[&str]) -> Output {
    let path = dir.join("run.toml");
    fs::write(&path, config).unwrap();
    let mut c = Command::new(env!("CARGO_BIN_EXE_ccm"));
    c.arg(cmd).arg("--config").arg(&path);
    c.arg("--set").arg(format!("output.dir=\"{}\"", dir.join("out").display()));
    for s in sets {
        c.arg("--set").arg(s);
    }
    c.output().unwrap()
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn soliton_simulation_is_stationary_in_its_frame() {
    let dir = tempfile::tempdir().unwrap();
    let out = ccm(dir.path(), "simulate", SOLITON, &[]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let r = json(&dir.path().join("out/report.json"));
    assert_eq!(r["status"]["status"], "completed");
    assert!(r["soliton_comoving_l2"].as_f64().unwrap() < 1e-6);
    assert!(r["final_vs_initial_l2"].as_f64().unwrap() > 0.0);
    assert_eq!(r["config"]["run"]["dt"], 1e-3);
    assert!(r["version"].is_string());
    let lines = fs::read_to_string(dir.path().join("out/trajectory.jsonl")).unwrap();
    assert_eq!(lines.lines().count(), 5);
    let manifest = json(&dir.path().join("out/manifest.json"));
    assert!(manifest["files"].as_array().unwrap().iter().any(|f| f == "field_00004.csv"));
}

#[test]
fn defocusing_gaussian_reports_conservation_table() {
    let dir = tempfile::tempdir().unwrap();
    let out = ccm(dir.path(), "simulate", GAUSSIAN, &[]);
    assert_eq!(out.status.code(), Some(0));
    let table = &json(&dir.path().join("out/report.json"))["conservation"];
    for k in ["mass", "momentum", "hamiltonian", "beta[1]", "beta[16]"] {
        assert!(table[k]["max_drift"].as_f64().unwrap() <= table[k]["tolerance"].as_f64().unwrap(), "{k}");
    }
}

#[test]
fn unknown_key_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = ccm(dir.path(), "simulate", &format!("{SOLITON}\n[compare]\nbounds = 1.0\n"), &[]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("bounds"));
    let out = ccm(dir.path(), "simulate", SOLITON, &["run.steps=3"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(!dir.path().join("out").exists());
}

#[test]
fn blowup_exits_with_three() {
    let dir = tempfile::tempdir().unwrap();
    let cfg =
        "[grid]\nn_points = 256\ndomain_length = 40.0\n[data]\nkind = \"random\"\nseed = 1\ndecay = 0.5\nmass = 50.0\n";
    let out = ccm(dir.path(), "simulate", cfg, &["run.dt=0.5", "run.t_final=20.0"]);
    assert_eq!(out.status.code(), Some(3));
    assert_eq!(json(&dir.path().join("out/report.json"))["status"]["status"], "blowup");
}

#[test]
fn gaussian_comparison_meets_its_bound() {
    let dir = tempfile::tempdir().unwrap();
    let out = ccm(dir.path(), "compare", GAUSSIAN, &[]);
    assert_eq!(out.status.code(), Some(0));
    let report = json(&dir.path().join("out/compare.json"));
    assert_eq!(report["above_focusing_threshold"], false);
    let rows = report["comparisons"].clone();
    let row = &rows[0];
    assert!(row["sup_error"].as_f64().unwrap() < 1e-4);
    assert!(row["l2_error"].as_f64().unwrap() > 0.0);
    let hist = row["solver_iterations_histogram"].as_array().unwrap();
    let total: u64 = hist.iter().map(|b| b[1].as_u64().unwrap()).sum();
    assert_eq!(total, 2048);
    assert!(row["ladder_depth"].is_u64());
}

#[test]
fn coarse_step_is_attributed_to_the_stepper() {
    let dir = tempfile::tempdir().unwrap();
    let out = ccm(dir.path(), "compare", GAUSSIAN, &["run.dt=0.5", "data.amplitude=2.0"]);
    assert_eq!(out.status.code(), Some(2));
    let row = json(&dir.path().join("out/compare.json"))["comparisons"][0].clone();
    assert_eq!(row["within_bound"], false);
    assert_eq!(row["attribution"]["dominant"], "time_step");
}

#[test]
fn zero_field_has_zero_beta() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = "[grid]\nn_points = 128\ndomain_length = 20.0\n[data]\nkind = \"random\"\nseed = 3\ndecay = 2.0\namplitude = 0.0\n";
    let out = ccm(dir.path(), "spectral", cfg, &[]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let s = &json(&dir.path().join("out/spectral.json"))["spectral"];
    for (_, v) in s["beta"].as_object().unwrap().iter().chain(s["beta2"].as_object().unwrap()) {
        assert_eq!(v.as_f64().unwrap(), 0.0);
    }
    assert!(s["bound_states"].as_array().unwrap().is_empty());
}

#[test]
fn soliton_spectrum_has_an_edge_candidate_near_zero() {
    let dir = tempfile::tempdir().unwrap();
    let out = ccm(dir.path(), "spectral", SOLITON, &["spectral.margin=0.25"]);
    assert_eq!(out.status.code(), Some(0));
    let s = &json(&dir.path().join("out/spectral.json"))["spectral"];
    let a = 2.0 * std::f64::consts::PI / 60.0;
    // L_R R = -dxi R on the circle
    assert!((s["kappa0"].as_f64().unwrap() - (0.25 + a)).abs() < 1e-9);
    let edges = s["edge_candidates"].as_array().unwrap();
    assert!(edges.iter().any(|e| (e.as_f64().unwrap() + a).abs() < 1e-9));
}

#[test]
fn beta_drift_table_along_a_trajectory() {
    let dir = tempfile::tempdir().unwrap();
    // the two-ladder extrapolation removes most of the ladder-cut drift at this size
    let sets = ["spectral.trajectory=true", "run.sign=focusing", "run.beta_method=\"extrapolated\""];
    let out = ccm(dir.path(), "spectral", GAUSSIAN, &sets);
    assert_eq!(out.status.code(), Some(0));
    let d = &json(&dir.path().join("out/spectral.json"))["beta_drift"];
    assert!(d["max_drift"].as_f64().unwrap() < 1e-6);
    assert_eq!(d["kappas"].as_object().unwrap().len(), 5);
}

#[test]
fn reports_are_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let sets = ["run.t_final=0.1", "data.kind=\"packets\"", "data.seed=5", "data.mass=2.0"];
    let cfg = SOLITON.replace("kind = \"soliton\"", "");
    let read = |name: &str| fs::read(dir.path().join("out").join(name)).unwrap();
    assert_eq!(ccm(dir.path(), "simulate", &cfg, &sets).status.code(), Some(0));
    let (report, traj) = (read("report.json"), read("trajectory.jsonl"));
    assert_eq!(ccm(dir.path(), "simulate", &cfg, &sets).status.code(), Some(0));
    assert_eq!(report, read("report.json"));
    assert_eq!(traj, read("trajectory.jsonl"));
    assert!(dir.path().join("out/timestamps.json").exists());
}

#[test]
fn field_dump_feeds_back_as_initial_data() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(ccm(dir.path(), "simulate", SOLITON, &["run.t_final=0.25"]).status.code(), Some(0));
    fs::rename(dir.path().join("out/field_00001.csv"), dir.path().join("q.csv")).unwrap();
    let cfg = SOLITON.replace("kind = \"soliton\"", "kind = \"file\"\npath = \"q.csv\"");
    let out = ccm(dir.path(), "spectral", &cfg, &[]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let out = ccm(dir.path(), "spectral", &cfg, &["grid.n_points=256"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn shipped_configs_are_valid() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    for entry in fs::read_dir(root).unwrap() {
        let path = entry.unwrap().path();
        let dir = tempfile::tempdir().unwrap();
        let out = ccm(dir.path(), "spectral", &fs::read_to_string(&path).unwrap(), &["grid.n_points=256"]);
        assert_eq!(out.status.code(), Some(0), "{}: {}", path.display(), String::from_utf8_lossy(&out.stderr));
    }
}
