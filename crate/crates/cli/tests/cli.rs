use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::{json, Value};

fn torkin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_torkin")).args(args).output().unwrap()
}

fn write(dir: &Path, name: &str, v: &Value) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, serde_json::to_string_pretty(v).unwrap()).unwrap();
    p
}

fn translation_doc(samples: usize) -> Value {
    json!({
        "manifold": "t2",
        "family": { "kind": "translation" },
        "experiment": { "name": "translation-example", "theta": std::f64::consts::FRAC_PI_2, "len_i": 1.0, "len_j": 1.0 },
        "sampling": { "num_samples": samples, "seed": 1 }
    })
}

fn summary(dir: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join("summary.json")).unwrap()).unwrap()
}

#[test]
fn translation_example_writes_summary_and_csv() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "t.json", &translation_doc(100_000));
    let out = tmp.path().join("out");
    let o = torkin(&["--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let s = summary(&out);
    assert_eq!(s["experiment"], "translation-example");
    let est = s["result"]["report"]["estimate"].as_f64().unwrap();
    assert!((est - 1.0).abs() < 0.02);
    assert_eq!(s["config"]["sampling"]["num_samples"], 100_000);
    assert_eq!(s["config_hash"].as_str().unwrap().len(), 64);
    let samples = std::fs::read_to_string(out.join("samples.csv")).unwrap();
    assert_eq!(samples.lines().next(), Some("index,count,degenerate,low_angle"));
    assert_eq!(samples.lines().count(), 100_001);
    let trace = std::fs::read_to_string(out.join("convergence.csv")).unwrap();
    assert!(trace.lines().last().unwrap().starts_with("100000,"));
}

#[test]
fn repeated_runs_are_byte_identical_apart_from_wall_time() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "t.json", &translation_doc(5000));
    let out = tmp.path().join("out");
    let strip = |dir: &Path| {
        let text = std::fs::read_to_string(dir.join("summary.json")).unwrap();
        text.lines().filter(|l| !l.trim_start().starts_with("\"wall_time_s\"")).collect::<Vec<_>>().join("\n")
    };
    let mut runs = Vec::new();
    for _ in 0..2 {
        assert!(torkin(&[cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "--set", "experiment.theta=0.7"])
            .status
            .success());
        runs.push(strip(&out));
    }
    assert_eq!(runs[0], runs[1]);
}

#[test]
fn seed_flag_overrides_the_config() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "t.json", &translation_doc(2000));
    let out = tmp.path().join("out");
    assert!(torkin(&[cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "--seed", "99"]).status.success());
    assert_eq!(summary(&out)["config"]["sampling"]["seed"], 99);
}

#[test]
fn negative_radius_exits_one_naming_the_field() {
    let tmp = tempfile::tempdir().unwrap();
    let mut doc = translation_doc(10);
    doc["family"] = json!({ "kind": "chart", "radius": -3.0 });
    let cfg = write(tmp.path(), "bad.json", &doc);
    let o = torkin(&["--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("family.radius"));
}

#[test]
fn schema_errors_exit_one_with_a_line_number() {
    let tmp = tempfile::tempdir().unwrap();
    let mut doc = translation_doc(10);
    doc["experiment"]["name"] = json!("no-such-experiment");
    let cfg = write(tmp.path(), "bad.json", &doc);
    let o = torkin(&["--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8_lossy(&o.stderr).to_string();
    assert!(err.contains("unknown variant") && err.contains("line"), "{err}");
}

#[test]
fn missing_config_and_bad_flags_exit_one() {
    assert_eq!(torkin(&[]).status.code(), Some(1));
    assert_eq!(torkin(&["--bogus"]).status.code(), Some(1));
    assert_eq!(torkin(&["/nonexistent/config.json"]).status.code(), Some(1));
}

#[test]
fn estimator_failure_exits_two() {
    let tmp = tempfile::tempdir().unwrap();
    let doc = json!({
        "manifold": "t2",
        "family": { "kind": "translation" },
        "experiment": {
            "name": "fiber-integral",
            "eps": 1e-4,
            "planes": [ { "p": [0.2, 0.3], "basis_p": [[1.0, 0.0]], "q": [0.7, 0.1], "basis_q": [[0.0, 1.0]] } ]
        },
        "sampling": { "num_samples": 10 }
    });
    let cfg = write(tmp.path(), "f.json", &doc);
    let out = tmp.path().join("out");
    let o = torkin(&[cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2), "{}", String::from_utf8_lossy(&o.stderr));
    // the summary still records which pair failed
    assert_eq!(summary(&out)["result"]["failed_pairs"], 1);
}

#[test]
fn failing_suite_exits_three() {
    let tmp = tempfile::tempdir().unwrap();
    let doc = json!({
        "manifold": "t2",
        "family": { "kind": "chart", "radius": 0.5 },
        "experiment": {
            "name": "verify",
            "trials": { "a1_trials": 5, "a2_trials": 5, "claim_2_2_trials": 2, "lemma_b2_trials": 10,
                        "prop_b1_trials": 2, "prop_b1_param_fd_checks": 1 }
        },
        "sampling": { "num_samples": 1 }
    });
    let cfg = write(tmp.path(), "v.json", &doc);
    let out = tmp.path().join("out");
    let o = torkin(&[cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
    let s = summary(&out);
    assert_eq!(s["result"]["passed"], false);
    let suites = std::fs::read_to_string(out.join("suites.csv")).unwrap();
    assert!(suites.contains("suite_A2"));
}

#[test]
fn shipped_verify_config_passes() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/verify-all.json");
    let out = tmp.path().join("out");
    let o = torkin(&[cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(summary(&out)["result"]["passed"], true);
}
