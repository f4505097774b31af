//! End-to-end tests of the command-line binary: determinism, formats and
//! the exit-code contract.

use std::path::Path;
use std::process::Command;

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_finslerlab")
}

fn write_cfg(dir: &Path, extra: serde_json::Value) -> std::path::PathBuf {
    let mut cfg = serde_json::json!({
        "metric": {
            "dimension": 2,
            "family": "randers",
            "b": {"kind": "sin_x2", "amp": 0.3},
            "chart_domain": {"lo": [-1.0, -1.0], "hi": [1.0, 1.0]}
        },
        "samples": {"count": 5, "seed": 9},
        "geodesic": {"x0": [0.0, 0.1], "y0": [1.0, 0.4], "duration": 0.3, "steps": 30}
    });
    if let (Some(base), Some(patch)) = (cfg.as_object_mut(), extra.as_object()) {
        for (k, v) in patch {
            base.insert(k.clone(), v.clone());
        }
    }
    let path = dir.join("cfg.json");
    std::fs::write(&path, serde_json::to_string_pretty(&cfg).unwrap()).unwrap();
    path
}

fn run(args: &[&str]) -> std::process::ExitStatus {
    Command::new(bin()).args(args).status().unwrap()
}

#[test]
fn all_commands_are_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(dir.path(), serde_json::json!({}));
    let cfg_s = cfg.to_str().unwrap();
    let artifacts = [
        ("eval", "eval.json"),
        ("classify", "classify.json"),
        ("verify", "verify.json"),
        ("geodesic", "trajectory.csv"),
    ];
    for (cmd, artifact) in artifacts {
        let out_a = dir.path().join(format!("{}-a", cmd));
        let out_b = dir.path().join(format!("{}-b", cmd));
        assert!(run(&[cmd, "--config", cfg_s, "--out", out_a.to_str().unwrap()]).success());
        assert!(run(&[cmd, "--config", cfg_s, "--out", out_b.to_str().unwrap()]).success());
        let a = std::fs::read(out_a.join(artifact)).unwrap();
        let b = std::fs::read(out_b.join(artifact)).unwrap();
        assert_eq!(a, b, "{} artifact differs between identical runs", cmd);
    }
}

#[test]
fn seed_override_changes_samples() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(dir.path(), serde_json::json!({}));
    let cfg_s = cfg.to_str().unwrap();
    let out_a = dir.path().join("a");
    let out_b = dir.path().join("b");
    assert!(run(&["eval", "--config", cfg_s, "--out", out_a.to_str().unwrap()]).success());
    assert!(run(&[
        "eval",
        "--config",
        cfg_s,
        "--out",
        out_b.to_str().unwrap(),
        "--seed",
        "99"
    ])
    .success());
    let a = std::fs::read(out_a.join("eval.json")).unwrap();
    let b = std::fs::read(out_b.join("eval.json")).unwrap();
    assert_ne!(a, b);
}

#[test]
fn csv_format_is_honored() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(dir.path(), serde_json::json!({}));
    let out = dir.path().join("csv");
    assert!(run(&[
        "classify",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--format",
        "csv"
    ])
    .success());
    let text = std::fs::read_to_string(out.join("classify.csv")).unwrap();
    assert!(text.starts_with("predicate,max_abs,verdict"));
    assert!(text.contains("c_reducible"));
}

#[test]
fn config_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    // unknown top-level field
    let bad = dir.path().join("unknown.json");
    std::fs::write(
        &bad,
        r#"{"metric": {"dimension": 2, "family": "riemannian",
            "chart_domain": {"lo": [-1.0, -1.0], "hi": [1.0, 1.0]}}, "bogus": 1}"#,
    )
    .unwrap();
    let st = run(&["eval", "--config", bad.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(st.code(), Some(2));
    // validation failure
    let cfg = write_cfg(dir.path(), serde_json::json!({"samples": {"count": 0}}));
    let st = run(&["eval", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(st.code(), Some(2));
    // geodesic command without a geodesic section
    let slim = dir.path().join("slim.json");
    std::fs::write(
        &slim,
        r#"{"metric": {"dimension": 2, "family": "riemannian",
            "chart_domain": {"lo": [-1.0, -1.0], "hi": [1.0, 1.0]}}}"#,
    )
    .unwrap();
    let st = run(&[
        "geodesic",
        "--config",
        slim.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(st.code(), Some(2));
}

#[test]
fn invalid_metric_is_a_numeric_failure() {
    let dir = tempfile::tempdir().unwrap();
    // Randers condition violated: |b| >= 1.
    let bad = dir.path().join("randers.json");
    std::fs::write(
        &bad,
        r#"{"metric": {"dimension": 2, "family": "randers",
            "b": {"kind": "constant", "values": [1.2, 0.0]},
            "chart_domain": {"lo": [-1.0, -1.0], "hi": [1.0, 1.0]}}}"#,
    )
    .unwrap();
    let st = run(&["eval", "--config", bad.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(st.code(), Some(1));
}
