use std::path::Path;
use std::process::Command;

fn stc() -> Command {
    Command::new(env!("CARGO_BIN_EXE_stc"))
}

fn write_config(dir: &Path, body: &str) -> std::path::PathBuf {
    let path = dir.join("run.toml");
    std::fs::write(&path, body).unwrap();
    path
}

const SMALL: &str = "regime = \"orthogonal_bounded_means\"\nn_list = [12, 16]\nkappa = 0.8\nseeds = [0, 1]\n";

#[test]
fn run_writes_report_files() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let out = dir.path().join("out");
    let status = stc().args(["run", "--config"]).arg(&cfg).arg("--out").arg(&out).status().unwrap();
    assert!(status.success());
    for f in ["metrics.csv", "aggregate.csv", "timings.csv", "error_vs_n.svg"] {
        assert!(out.join(f).is_file(), "{f}");
    }
    let metrics = std::fs::read_to_string(out.join("metrics.csv")).unwrap();
    assert_eq!(metrics.lines().count(), 5);
}

#[test]
fn repeated_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let mut outputs = Vec::new();
    for (k, jobs) in ["1", "2"].iter().enumerate() {
        let out = dir.path().join(format!("out{k}"));
        let status = stc()
            .args(["run", "--jobs", jobs, "--config"])
            .arg(&cfg)
            .arg("--out")
            .arg(&out)
            .status()
            .unwrap();
        assert!(status.success());
        outputs.push(std::fs::read(out.join("metrics.csv")).unwrap());
    }
    assert_eq!(outputs[0], outputs[1]);
}

#[test]
fn config_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    for body in ["regime = \"nope\"\n", "regime = \"general_tucker\"\nn_list = []\nkappa = 0.5\nseeds = [0]\n", "not toml ["] {
        let cfg = write_config(dir.path(), body);
        let out = stc().args(["run", "--config"]).arg(&cfg).output().unwrap();
        assert_eq!(out.status.code(), Some(1), "{body:?}");
        assert!(!out.stderr.is_empty());
    }
    let missing = stc().args(["run", "--config", "/nonexistent/run.toml"]).output().unwrap();
    assert_eq!(missing.status.code(), Some(1));
}

#[test]
fn runtime_errors_exit_with_two() {
    let out = stc().args(["oracle-check", "--n", "1000", "--seed", "0"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn oracle_check_passes() {
    let out = stc().args(["oracle-check", "--n", "20", "--seed", "3"]).output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().count(), 5);
    assert!(!text.contains("FAIL"));
}

#[test]
fn hardness_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let status = stc()
        .args(["hardness", "--bias", "0", "--n", "50", "--seeds", "4", "--out"])
        .arg(dir.path())
        .status()
        .unwrap();
    assert!(status.success());
    let csv = std::fs::read_to_string(dir.path().join("hardness.csv")).unwrap();
    assert_eq!(csv.lines().count(), 5);
    let bad = stc().args(["hardness", "--bias", "0.7", "--n", "50"]).output().unwrap();
    assert_eq!(bad.status.code(), Some(1));
}
