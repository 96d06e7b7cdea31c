//! End-to-end tests of the `fedcome` binary: exit codes, emitted files,
//! overrides, the seed environment variable, and sweep layout.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::{json, Value};
use tempfile::TempDir;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_fedcome"));
    // Keep tests hermetic even when the harness environment sets the seed.
    c.env_remove("FEDCOME_SEED");
    c
}

/// A four-client, two-round manifest small enough that every invocation
/// finishes in milliseconds.
fn manifest_json(out_dir: &Path) -> Value {
    json!({
        "dataset": {
            "source": "synthetic",
            "num_classes": 2,
            "samples_per_class": 16,
            "dim": 3,
            "separation": 2.0,
            "seed": 0,
            "partition": { "num_clients": 4, "classes_per_client": 1, "seed": 0 }
        },
        "model": { "hidden_dims": [4] },
        "federation": {
            "method": "fedcome",
            "rounds": 2,
            "local_epochs": 1,
            "batch_size": 0,
            "eta": 0.05
        },
        "output_dir": out_dir.to_string_lossy()
    })
}

fn write_manifest(dir: &Path, v: &Value) -> PathBuf {
    let p = dir.join("manifest.json");
    fs::write(&p, serde_json::to_string_pretty(v).unwrap()).unwrap();
    p
}

fn stdout_of(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr_of(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("process terminated by signal")
}

fn line_count(path: &Path) -> usize {
    fs::read_to_string(path).unwrap().lines().count()
}

#[test]
fn run_writes_metrics_summary_and_similarity() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("out");
    let manifest = write_manifest(tmp.path(), &manifest_json(&out));
    let o = bin().arg("run").arg(&manifest).output().unwrap();
    assert_eq!(code(&o), 0, "stderr: {}", stderr_of(&o));
    assert!(stdout_of(&o).contains("run complete"), "stdout: {}", stdout_of(&o));
    assert_eq!(line_count(&out.join("metrics.csv")), 3); // header + 2 rounds
    let summary: Value =
        serde_json::from_str(&fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["config_snapshot"]["rounds"], 2);
    // consensus methods also dump the learned similarity table
    assert!(out.join("similarity.csv").exists());
}

#[test]
fn run_with_override_changes_round_count() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("out");
    let manifest = write_manifest(tmp.path(), &manifest_json(&out));
    let o = bin()
        .arg("run")
        .arg(&manifest)
        .arg("--set")
        .arg("federation.rounds=3")
        .output()
        .unwrap();
    assert_eq!(code(&o), 0, "stderr: {}", stderr_of(&o));
    assert_eq!(line_count(&out.join("metrics.csv")), 4); // header + 3 rounds
}

#[test]
fn run_rejects_invalid_config_naming_the_field() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("out");
    let manifest = write_manifest(tmp.path(), &manifest_json(&out));
    let o = bin()
        .arg("run")
        .arg(&manifest)
        .arg("--set")
        .arg("federation.eta=-1")
        .output()
        .unwrap();
    assert_eq!(code(&o), 2);
    assert!(stderr_of(&o).contains("federation.eta"), "stderr: {}", stderr_of(&o));
}

#[test]
fn run_missing_manifest_is_usage_error() {
    let o = bin().arg("run").arg("/no/such/manifest.json").output().unwrap();
    assert_eq!(code(&o), 2);
    assert!(!stderr_of(&o).is_empty());
}

#[test]
fn reruns_are_byte_identical() {
    let tmp = TempDir::new().unwrap();
    let mut outputs = Vec::new();
    for name in ["a", "b"] {
        let out = tmp.path().join(name);
        let manifest = write_manifest(&tmp.path().join(format!("m-{name}")), {
            fs::create_dir_all(tmp.path().join(format!("m-{name}"))).unwrap();
            &manifest_json(&out)
        });
        let o = bin().arg("run").arg(&manifest).output().unwrap();
        assert_eq!(code(&o), 0, "stderr: {}", stderr_of(&o));
        outputs.push(out);
    }
    for file in ["metrics.csv", "summary.json", "similarity.csv"] {
        let a = fs::read(outputs[0].join(file)).unwrap();
        let b = fs::read(outputs[1].join(file)).unwrap();
        assert_eq!(a, b, "{file} differs between identical runs");
    }
}

#[test]
fn seed_env_overrides_manifest_seed() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("out");
    let manifest = write_manifest(tmp.path(), &manifest_json(&out));
    let o = bin()
        .arg("run")
        .arg(&manifest)
        .env("FEDCOME_SEED", "7")
        .output()
        .unwrap();
    assert_eq!(code(&o), 0, "stderr: {}", stderr_of(&o));
    let summary: Value =
        serde_json::from_str(&fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["config_snapshot"]["seed"], 7);
}

#[test]
fn invalid_seed_env_is_usage_error_naming_the_variable() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("out");
    let manifest = write_manifest(tmp.path(), &manifest_json(&out));
    let o = bin()
        .arg("run")
        .arg(&manifest)
        .env("FEDCOME_SEED", "not-a-number")
        .output()
        .unwrap();
    assert_eq!(code(&o), 2);
    assert!(stderr_of(&o).contains("FEDCOME_SEED"), "stderr: {}", stderr_of(&o));
    assert!(!out.join("metrics.csv").exists());
}

#[test]
fn similarity_table_roundtrip_and_size_check() {
    let tmp = TempDir::new().unwrap();
    let first_out = tmp.path().join("first");
    let manifest = write_manifest(tmp.path(), &manifest_json(&first_out));
    let o = bin().arg("run").arg(&manifest).output().unwrap();
    assert_eq!(code(&o), 0, "stderr: {}", stderr_of(&o));
    let table = first_out.join("similarity.csv");

    // restoring the dumped table into a compatible run succeeds
    let second_out = tmp.path().join("second");
    let mut v = manifest_json(&second_out);
    v["similarity_init"] = Value::from(table.to_string_lossy().into_owned());
    let manifest2 = write_manifest(&tmp.path().join("m2"), {
        fs::create_dir_all(tmp.path().join("m2")).unwrap();
        &v
    });
    let o = bin().arg("run").arg(&manifest2).output().unwrap();
    assert_eq!(code(&o), 0, "stderr: {}", stderr_of(&o));

    // a table sized for 4 clients is rejected by a 2-client run
    let third_out = tmp.path().join("third");
    let mut v = manifest_json(&third_out);
    v["similarity_init"] = Value::from(table.to_string_lossy().into_owned());
    v["dataset"]["partition"]["num_clients"] = Value::from(2);
    let manifest3 = write_manifest(&tmp.path().join("m3"), {
        fs::create_dir_all(tmp.path().join("m3")).unwrap();
        &v
    });
    let o = bin().arg("run").arg(&manifest3).output().unwrap();
    assert_eq!(code(&o), 2);
    assert!(stderr_of(&o).contains("similarity_init"), "stderr: {}", stderr_of(&o));
}

#[test]
fn runtime_write_failure_exits_one() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("out");
    // occupy the metrics path with a directory so the CSV write fails after
    // validation has already passed
    fs::create_dir_all(out.join("metrics.csv")).unwrap();
    let manifest = write_manifest(tmp.path(), &manifest_json(&out));
    let o = bin().arg("run").arg(&manifest).output().unwrap();
    assert_eq!(code(&o), 1, "stderr: {}", stderr_of(&o));
}

#[test]
fn verify_consensus_prints_pass_lines() {
    let o = bin().arg("verify").arg("consensus").output().unwrap();
    assert_eq!(code(&o), 0, "stderr: {}", stderr_of(&o));
    let out = stdout_of(&o);
    assert!(out.contains("[PASS] consensus::"), "stdout: {out}");
    assert!(!out.contains("[FAIL]"), "stdout: {out}");
}

#[test]
fn verify_unknown_suite_is_usage_error() {
    let o = bin().arg("verify").arg("nope").output().unwrap();
    assert_eq!(code(&o), 2);
    let err = stderr_of(&o);
    for name in ["qp", "consensus", "descent", "sampler"] {
        assert!(err.contains(name), "stderr: {err}");
    }
}

#[test]
fn sweep_runs_each_value_and_writes_csv() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("out");
    let manifest = write_manifest(tmp.path(), &manifest_json(&out));
    let o = bin()
        .arg("sweep")
        .arg(&manifest)
        .args(["--param", "alpha", "--values", "0.2,0.8"])
        .output()
        .unwrap();
    assert_eq!(code(&o), 0, "stderr: {}", stderr_of(&o));
    assert!(stdout_of(&o).contains("sweep complete"), "stdout: {}", stdout_of(&o));
    for sub in ["alpha=0.2", "alpha=0.8"] {
        assert!(out.join(sub).join("metrics.csv").exists(), "missing {sub}");
    }
    let csv = fs::read_to_string(out.join("sweep.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3, "csv: {csv}");
    assert!(csv.starts_with("param,value,"), "csv: {csv}");
}

#[test]
fn sweep_participation_ratio_sets_partial_mode() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("out");
    let manifest = write_manifest(tmp.path(), &manifest_json(&out));
    let o = bin()
        .arg("sweep")
        .arg(&manifest)
        .args(["--param", "participation_ratio", "--values", "0.5"])
        .output()
        .unwrap();
    assert_eq!(code(&o), 0, "stderr: {}", stderr_of(&o));
    let summary: Value = serde_json::from_str(
        &fs::read_to_string(out.join("participation_ratio=0.5").join("summary.json")).unwrap(),
    )
    .unwrap();
    let participation = &summary["config_snapshot"]["participation"];
    assert_eq!(participation["mode"], "partial");
    assert_eq!(participation["m"], 2); // ceil(0.5 * 4 clients)
}

#[test]
fn sweep_unknown_param_is_usage_error() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("out");
    let manifest = write_manifest(tmp.path(), &manifest_json(&out));
    let o = bin()
        .arg("sweep")
        .arg(&manifest)
        .args(["--param", "learning_rate", "--values", "0.1"])
        .output()
        .unwrap();
    assert_eq!(code(&o), 2);
    assert!(stderr_of(&o).contains("alpha"), "stderr: {}", stderr_of(&o));
}

#[test]
fn sweep_empty_values_is_usage_error() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("out");
    let manifest = write_manifest(tmp.path(), &manifest_json(&out));
    let o = bin()
        .arg("sweep")
        .arg(&manifest)
        .args(["--param", "alpha", "--values", ""])
        .output()
        .unwrap();
    assert_eq!(code(&o), 2);
}

#[test]
fn sweep_rejects_bad_values_before_running_anything() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("out");
    let manifest = write_manifest(tmp.path(), &manifest_json(&out));
    let o = bin()
        .arg("sweep")
        .arg(&manifest)
        .args(["--param", "alpha", "--values", "0.2,oops"])
        .output()
        .unwrap();
    assert_eq!(code(&o), 2);
    // validation happens before any sub-run, so even the good value left
    // no output behind
    assert!(!out.join("alpha=0.2").exists());
}
