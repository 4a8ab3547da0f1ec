use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn yamabe(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_yamabe"))
        .args(args)
        .current_dir(dir)
        .env_remove("YAMABE_OUT_DIR")
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, text: &str) -> String {
    let path = dir.join("config.json");
    fs::write(&path, text).unwrap();
    path.to_string_lossy().into_owned()
}

const CONTINUE_CONFIG: &str = r#"{
    "model": "sphere3",
    "grid": {"r_max": 3.141592653589793, "N": 200},
    "schedule": {"alpha": [0.2, 0.0], "p": [2, 4, 6]},
    "margins": {"qbar": -1e9, "sphere": -1e9},
    "minimize": {"jitter": 0.1}
}"#;

#[test]
fn continue_is_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), CONTINUE_CONFIG);
    let mut outputs = Vec::new();
    for run in ["a", "b"] {
        let out = yamabe(&["continue", "--config", &cfg, "--seed", "5", "--out", run, "--quiet"], dir.path());
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
        assert!(out.stdout.is_empty());
        let read = |f: &str| fs::read(dir.path().join(run).join(f)).unwrap();
        outputs.push((read("summary.json"), read("trace.csv"), read("field.csv")));
    }
    assert_eq!(outputs[0], outputs[1]);
    let trace = String::from_utf8(outputs[0].1.clone()).unwrap();
    assert!(trace.starts_with("stage,alpha,p,Q,sup_v,argmax_r,residual,iterations,norm_pcrit\n"));
    assert!(trace.lines().count() > 3 && !trace.contains('\r'));

    // a different seed changes the jittered start, hence the trace
    let out = yamabe(&["continue", "--config", &cfg, "--seed", "6", "--out", "c", "--quiet"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    assert_ne!(fs::read(dir.path().join("c/trace.csv")).unwrap(), outputs[0].1);
}

#[test]
fn unknown_key_is_a_config_error_naming_the_key() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), r#"{"model": "flat3", "grid": {"r_max": 10, "N": 50, "step": 1}}"#);
    let out = yamabe(&["q", "--config", &cfg], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("step"));
    assert!(!dir.path().join("out").exists());
}

#[test]
fn argument_errors_exit_with_two_and_help_with_zero() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(yamabe(&["frobnicate"], dir.path()).status.code(), Some(2));
    assert_eq!(yamabe(&["q"], dir.path()).status.code(), Some(2));
    assert_eq!(yamabe(&["--help"], dir.path()).status.code(), Some(0));
    let models = yamabe(&["models"], dir.path());
    assert_eq!(models.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&models.stdout).contains("hyperbolic<n>"));
}

#[test]
fn bubble_on_flat_space_succeeds() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), r#"{"model": "flat3", "grid": {"r_max": 20, "N": 1000}, "bubble": {"tol": 0.02}}"#);
    let out = yamabe(&["bubble", "--config", &cfg, "--out", "b"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    let summary: serde_json::Value = serde_json::from_slice(&fs::read(dir.path().join("b/summary.json")).unwrap()).unwrap();
    assert_eq!(summary["bubble"]["passed"], true);
    let field = fs::read_to_string(dir.path().join("b/field.csv")).unwrap();
    assert!(field.starts_with("r,v,rho_alpha_v\n"));
}

#[test]
fn hyperbolic_continue_fails_the_qbar_hypothesis() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), r#"{"model": "hyperbolic3", "grid": {"r_max": 20, "N": 500}}"#);
    let out = yamabe(&["continue", "--config", &cfg, "--out", "h", "--quiet"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    let summary: serde_json::Value = serde_json::from_slice(&fs::read(dir.path().join("h/summary.json")).unwrap()).unwrap();
    let notes = summary["verdict"]["notes"].as_array().unwrap();
    assert!(notes.iter().any(|n| n.as_str().unwrap().contains("qbar_exceeds_q failed")));
    assert!(summary["verdict"]["final"].is_null());
    let trace = fs::read_to_string(dir.path().join("h/trace.csv")).unwrap();
    assert_eq!(trace.lines().count(), 1);
}

#[test]
fn out_dir_comes_from_the_environment_when_no_flag_is_given() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), r#"{"model": "flat3", "grid": {"r_max": 10, "N": 100}, "output": {"dir": "from_config"}}"#);
    let out = Command::new(env!("CARGO_BIN_EXE_yamabe"))
        .args(["q", "--config", &cfg, "--quiet"])
        .current_dir(dir.path())
        .env("YAMABE_OUT_DIR", dir.path().join("from_env"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert!(dir.path().join("from_env/summary.json").exists());
    assert!(!dir.path().join("from_config").exists());
}

#[test]
fn mu_sweep_reports_a_nonincreasing_sequence() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), r#"{"model": "hyperbolic3", "grid": {"r_max": 20, "N": 399}, "mu": {"r_max_sweep": [10, 40]}}"#);
    let out = yamabe(&["mu", "--config", &cfg, "--out", "m", "--quiet"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    let summary: serde_json::Value = serde_json::from_slice(&fs::read(dir.path().join("m/summary.json")).unwrap()).unwrap();
    assert_eq!(summary["nonincreasing_in_r_max"], true);
    assert_eq!(summary["sweep"].as_array().unwrap().len(), 3);
    assert_eq!(summary["mu"]["r_max"], 20.0);
}

#[test]
fn nonconvergence_exits_with_three() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), r#"{"model": "flat3", "grid": {"r_max": 10, "N": 300}, "p": 5, "minimize": {"max_iter": 1, "residual_tol": 1e-14}}"#);
    let out = yamabe(&["q", "--config", &cfg, "--out", "n"], dir.path());
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
}
