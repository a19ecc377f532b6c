//! End-to-end checks of the command-line interface: spec'd outputs, exit
//! codes, and byte-identical round trips of emitted configs.

use std::process::Command;

fn ustat() -> Command {
    Command::new(env!("CARGO_BIN_EXE_ustat"))
}

fn stdout_of(out: std::process::Output) -> String {
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

#[test]
fn count_word_with_gaps() {
    let dir = tempfile::tempdir().unwrap();
    let text_path = dir.path().join("t.txt");
    std::fs::write(&text_path, "10101").unwrap();
    let out = ustat()
        .args(["count", "--word", "101", "--gaps", "1,inf"])
        .arg("--text-file")
        .arg(&text_path)
        .output()
        .unwrap();
    assert_eq!(stdout_of(out).trim(), "3");
}

#[test]
fn count_inversions_in_permutation() {
    let out = ustat()
        .args(["count", "--perm", "2,1", "--permutation", "3 1 2"])
        .output()
        .unwrap();
    assert_eq!(stdout_of(out).trim(), "2");
}

#[test]
fn moments_of_inversions() {
    let dir = tempfile::tempdir().unwrap();
    let stem = dir.path().join("m");
    let out = ustat()
        .args(["moments", "--perm", "2,1", "--gaps", "inf"])
        .arg("--out")
        .arg(&stem)
        .output()
        .unwrap();
    let digest = stdout_of(out);
    assert!(digest.contains("sigma2"));
    let doc: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(format!("{}.json", stem.display())).unwrap())
            .unwrap();
    let mu = doc["result"]["mu"].as_f64().unwrap();
    let sigma2 = doc["result"]["sigma2"].as_f64().unwrap();
    assert!((mu - 0.5).abs() < 1e-15);
    assert!((sigma2 - 1.0 / 36.0).abs() < 1e-12);
}

#[test]
fn degeneracy_of_named_example() {
    let out = ustat()
        .args(["degeneracy", "--example", "e0"])
        .output()
        .unwrap();
    let digest = stdout_of(out);
    assert!(digest.contains("Degenerate"), "{digest}");
}

#[test]
fn validation_errors_exit_2() {
    let out = ustat()
        .args(["count", "--word", "101", "--gaps", "1", "--text", "111"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));

    let out = ustat()
        .args(["degeneracy", "--example", "not-a-case"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn budget_errors_exit_3() {
    let out = ustat()
        .args([
            "count",
            "--perm",
            "1,2,3",
            "--permutation",
            &(1..=60).map(|v| v.to_string()).collect::<Vec<_>>().join(" "),
            "--budget",
            "10",
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn emitted_config_reruns_byte_identically() {
    let dir = tempfile::tempdir().unwrap();
    let first = dir.path().join("a");
    let out = ustat()
        .args([
            "simulate",
            "--word",
            "11",
            "--probs",
            "0.5,0.5",
            "--n-grid",
            "64,128",
            "--reps",
            "200",
            "--seed",
            "9",
        ])
        .arg("--out")
        .arg(&first)
        .output()
        .unwrap();
    stdout_of(out);
    let second = dir.path().join("b");
    let rerun_cfg = dir.path().join("rerun.json");
    // Point the emitted config's output at a fresh stem and run it.
    let doc: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(format!("{}.json", first.display())).unwrap())
            .unwrap();
    let mut cfg = doc["config"].clone();
    cfg["out"] = serde_json::Value::String(second.display().to_string());
    std::fs::write(&rerun_cfg, serde_json::to_string(&cfg).unwrap()).unwrap();
    let out = ustat().args(["run", "--config"]).arg(&rerun_cfg).output().unwrap();
    stdout_of(out);
    let a = std::fs::read(format!("{}.csv", first.display())).unwrap();
    let b = std::fs::read(format!("{}.csv", second.display())).unwrap();
    assert_eq!(a, b, "re-running the emitted config must reproduce the CSV");
}

#[test]
fn spectral_reports_levels() {
    let out = ustat()
        .args(["spectral", "--example", "e21"])
        .output()
        .unwrap();
    let digest = stdout_of(out);
    assert!(digest.contains("degeneracy_order  Some(2)"), "{digest}");
}
