use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn siglab(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_siglab"))
        .args(args)
        .current_dir(dir)
        .env_remove("SIGLAB_SEED")
        .env_remove("SIGLAB_SCENARIO")
        .output()
        .unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path
}

const SMALL: &str = r#"
master_seed = 3

[[scenario]]
kind = "toy"
n = [400, 800]
replicas = 2
"#;

#[test]
fn validate_reports_grid_size() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "exp.toml", SMALL);
    let out = siglab(&["validate", "-c", "exp.toml"], dir.path());
    assert!(out.status.success());
    assert_eq!(
        String::from_utf8_lossy(&out.stdout).trim(),
        "OK: 2 grid point(s), 4 replica(s)"
    );
}

#[test]
fn run_writes_outputs_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "exp.toml", SMALL);
    let out = siglab(
        &["-q", "run", "-c", "exp.toml", "-o", "out", "-w", "1"],
        dir.path(),
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let base = dir.path().join("out");
    let metrics = std::fs::read_to_string(base.join("metrics.csv")).unwrap();
    assert!(metrics.starts_with("scenario,replica,n,p,beta,strategy,metric,value\n"));
    // 2 grid points x 2 replicas x (8 screening + 7 no-screening metrics)
    assert_eq!(metrics.lines().count(), 1 + 2 * 2 * (8 + 7));
    let summary = std::fs::read_to_string(base.join("summary.csv")).unwrap();
    assert!(summary.starts_with("scenario,n,p,beta,strategy,metric,mean,sd,count,nulls\n"));
    let freq = std::fs::read_to_string(base.join("selection_frequency.csv")).unwrap();
    assert_eq!(freq.lines().count(), 1 + 2 * 2 * 18);

    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(base.join("manifest.json")).unwrap())
            .unwrap();
    assert_eq!(manifest["master_seed"], 3);
    assert_eq!(manifest["replicas_total"], 4);
    assert_eq!(manifest["total_failure"], false);
    assert_eq!(manifest["scenarios"].as_array().unwrap().len(), 2);
}

#[test]
fn seed_flag_changes_results() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "exp.toml", SMALL);
    for (seed, out) in [("3", "a"), ("3", "b"), ("4", "c")] {
        let o = siglab(
            &[
                "-q",
                "run",
                "-c",
                "exp.toml",
                "-o",
                out,
                "--seed",
                seed,
                "--scenario",
                "toy",
            ],
            dir.path(),
        );
        assert!(o.status.success());
    }
    let read = |d: &str| std::fs::read(dir.path().join(d).join("metrics.csv")).unwrap();
    assert_eq!(read("a"), read("b"));
    assert_ne!(read("a"), read("c"));
}

#[test]
fn invalid_config_exits_with_code_two() {
    let dir = tempfile::tempdir().unwrap();
    write(
        dir.path(),
        "bad.toml",
        "[[scenario]]\nkind = \"s2\"\np_child = 25\nmothers = 7\nstep_brothers = 25\n",
    );
    let out = siglab(&["validate", "-c", "bad.toml"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("do not fit in p = 1000"));

    write(dir.path(), "broken.toml", "[[scenario]\n");
    assert_eq!(
        siglab(&["validate", "-c", "broken.toml"], dir.path())
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        siglab(&["validate", "-c", "missing.toml"], dir.path())
            .status
            .code(),
        Some(2)
    );
    let nothing = siglab(
        &["validate", "-c", "bad.toml", "--scenario", "toy"],
        dir.path(),
    );
    assert_eq!(nothing.status.code(), Some(2));
}

#[test]
fn unknown_keys_warn_with_suggestion() {
    let dir = tempfile::tempdir().unwrap();
    write(
        dir.path(),
        "exp.toml",
        "[[scenario]]\nkind = \"toy\"\nreplicass = 3\n",
    );
    let out = siglab(&["validate", "-c", "exp.toml"], dir.path());
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("did you mean `replicas`"));
}

#[test]
fn oracle_on_toy_fixture() {
    let fixture = Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/fixtures/toy.json");
    let dir = tempfile::tempdir().unwrap();
    let out = siglab(
        &["oracle", "--graph", fixture.to_str().unwrap()],
        dir.path(),
    );
    assert!(out.status.success());
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["exposure"], "E");
    assert_eq!(
        report["screening"],
        serde_json::json!(["M1", "M3", "M6", "M11", "M18"])
    );
    assert_eq!(
        report["noscreening"],
        serde_json::json!(["M1", "M2", "M3", "M6", "M7", "M9", "M11", "M14", "M15", "M18", "M19"])
    );
}

#[test]
fn oracle_from_config_uses_first_scenario() {
    let dir = tempfile::tempdir().unwrap();
    write(
        dir.path(),
        "exp.toml",
        "[[scenario]]\nkind = \"s3\"\nblocks = 2\n",
    );
    let out = siglab(
        &["oracle", "-c", "exp.toml", "-o", "report.json"],
        dir.path(),
    );
    assert!(out.status.success());
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("report.json")).unwrap())
            .unwrap();
    assert_eq!(report["screening"].as_array().unwrap().len(), 10);
    assert_eq!(report["noscreening"].as_array().unwrap().len(), 22);
}
