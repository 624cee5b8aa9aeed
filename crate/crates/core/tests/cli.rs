use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use chemoflow::harness::RunConfig;

fn chemoflow(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_chemoflow")).args(args).output().expect("binary runs")
}

fn write_config(dir: &Path, text: &str) -> String {
    let path = dir.join("run.cfg");
    fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_owned()
}

const SHORT: &str = "\
# short blob run
grid.cells = 16, 16
time.t_final = 0.004
output.cadence = 5
output.snapshot_times = 0.002
";

#[test]
fn run_writes_outputs_and_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SHORT);
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for out in [&a, &b] {
        let o = chemoflow(&["run", "--config", &cfg, "--out", out.to_str().unwrap()]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let csv_a = fs::read(a.join("diagnostics.csv")).unwrap();
    assert_eq!(csv_a, fs::read(b.join("diagnostics.csv")).unwrap());
    let text = String::from_utf8(csv_a).unwrap();
    assert!(text.starts_with("t,mass,"));
    let written = RunConfig::parse(&fs::read_to_string(a.join("config.cfg")).unwrap()).unwrap();
    assert_eq!(written, RunConfig::parse(SHORT).unwrap());
    let snaps: Vec<_> = fs::read_dir(a.join("snapshots")).unwrap().collect();
    assert_eq!(snaps.len(), 5);
}

#[test]
fn random_preset_without_seed_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "init.preset = random-perturbation\n");
    let o = chemoflow(&["run", "--config", &cfg, "--out", dir.path().join("o").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn unknown_key_and_missing_file_are_config_errors() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "model.speed = 3\n");
    assert_eq!(chemoflow(&["validate", "--config", &cfg]).status.code(), Some(3));
    assert_eq!(chemoflow(&["validate", "--config", "/nonexistent/x.cfg"]).status.code(), Some(3));
}

#[test]
fn validate_reports_assumptions() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "model.kinetics = saturating\n");
    let o = chemoflow(&["validate", "--config", &cfg]);
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.contains("ratio_concave") && text.contains("overall: PASS"), "{text}");

    let cfg = write_config(dir.path(), "model.kinetics = quadratic\n");
    let o = chemoflow(&["validate", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(3));
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.contains("[FAIL] ratio_concave"), "{text}");
}

#[test]
fn unstable_fixed_step_exits_with_invariant_code() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "grid.cells = 16, 16\ntime.dt = 0.01\ntime.t_final = 0.05\n");
    let out = dir.path().join("o");
    let o = chemoflow(&["run", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("step 0"));
    assert!(out.join("diagnostics.csv").exists());
}

#[test]
fn study_subcommands_reject_short_size_lists() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    assert_eq!(chemoflow(&["mms", "--sizes", "8,16", "--out", out]).status.code(), Some(3));
    assert_eq!(chemoflow(&["barenblatt", "--m", "1", "--sizes", "8,16,32", "--out", out]).status.code(), Some(3));
}

#[test]
fn mms_subcommand_writes_table() {
    let dir = tempfile::tempdir().unwrap();
    let o = chemoflow(&["mms", "--sizes", "8,16,32", "--out", dir.path().to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stdout));
    let csv = fs::read_to_string(dir.path().join("mms.csv")).unwrap();
    assert_eq!(csv.lines().count(), 7);
    assert!(csv.lines().nth(1).unwrap().starts_with("oxygen,8,"));
}

#[test]
fn eps_study_subcommand_writes_table() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "grid.cells = 12, 12\ntime.t_final = 0.002\n");
    let out = dir.path().join("s");
    let o = chemoflow(&["eps-study", "--config", &cfg, "--eps", "0.1,0.05,0.025", "--out", out.to_str().unwrap()]);
    assert!(o.status.code().is_some_and(|c| c == 0 || c == 2), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(out.join("eps_study.csv")).unwrap();
    assert_eq!(csv.lines().count(), 4);
    assert!(out.join("eps_0/diagnostics.csv").exists());
}
