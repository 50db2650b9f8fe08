use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_robust-tandem");

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(BIN)
        .args(args)
        .current_dir(dir)
        .env("RT_THREADS", "1")
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = run(dir, args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

const EXAMPLE: &str = r#"{
  "model": {"kind": "exponential_means", "m0": 1.0, "m1": 2.0},
  "priors": {"pi0": 0.5},
  "eps": 0.01,
  "rule": {"t1": 0.5762966463619494, "t0": 1.1, "p": 1.0, "q": 0.0},
  "n": 12,
  "n_samples": 20000,
  "seed": 3
}"#;

#[test]
fn lfd_prints_breakpoints() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("c.json"), EXAMPLE).unwrap();
    let out = ok(dir.path(), &["lfd", "--config", "c.json", "--out", "r/"]);
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert!((v["c_lo"].as_f64().unwrap() - 0.576297).abs() < 1e-5);
    assert!((v["c_hi"].as_f64().unwrap() - 4.974937).abs() < 1e-5);
    assert!(dir.path().join("r/manifest.json").exists());
}

#[test]
fn chain_csv_and_manifest_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("c.json"), EXAMPLE).unwrap();
    ok(dir.path(), &["chain", "--config", "c.json", "--out", "a/"]);
    let csv = fs::read_to_string(dir.path().join("a/chain.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("k,P_F,P_M,P_e"));
    let first: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(first, ["1", "0.2575", "0.505", "0.38125"]);
    assert_eq!(csv.lines().count(), 13);

    // Re-running from the manifest reproduces the outputs.
    ok(dir.path(), &["chain", "--config", "a/manifest.json", "--out", "b/"]);
    assert_eq!(csv, fs::read_to_string(dir.path().join("b/chain.csv")).unwrap());
}

#[test]
fn simulate_is_seeded() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("c.json"), EXAMPLE).unwrap();
    ok(dir.path(), &["simulate", "--config", "c.json", "--out", "a/"]);
    ok(dir.path(), &["simulate", "--config", "a/manifest.json", "--out", "b/"]);
    let a = fs::read_to_string(dir.path().join("a/simulate.csv")).unwrap();
    assert_eq!(a, fs::read_to_string(dir.path().join("b/simulate.csv")).unwrap());
    assert!(a.starts_with("k,P_F_hat,P_M_hat,P_e_hat,se\n"));
    ok(dir.path(), &["simulate", "--config", "c.json", "--out", "c/", "--seed", "4"]);
    assert_ne!(a, fs::read_to_string(dir.path().join("c/simulate.csv")).unwrap());
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("a/simulate.json")).unwrap()).unwrap();
    assert!(summary["max_abs_z_vs_exact"].as_f64().unwrap() < 4.5);
}

#[test]
fn optimize_and_figure() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("c.json"), EXAMPLE).unwrap();
    let out = ok(dir.path(), &["optimize", "--config", "c.json", "--objective", "unknown-sl", "--out", "o/"]);
    assert!(out.starts_with("unknown-sl value = 0.344"), "{out}");
    ok(dir.path(), &["figure", "--preset", "fig-rules", "--out", "f/"]);
    for name in ["fig-rules-phi-a.csv", "fig-rules-phi-b.csv", "fig-rules.json", "manifest.json"] {
        assert!(dir.path().join("f").join(name).exists(), "{name}");
    }
}

#[test]
fn bad_input_fails_with_context() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("bad.json"), r#"{"model": {"kind": "exponential_means", "m0": 1.0, "m1": 2.0}, "nn": 3}"#).unwrap();
    let out = run(dir.path(), &["chain", "--config", "bad.json"]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("nn") && err.contains("line 1"), "{err}");

    let out = run(dir.path(), &["figure", "--preset", "fig-nope"]);
    assert!(!out.status.success());

    fs::write(dir.path().join("wide.json"), r#"{"model": {"kind": "exponential_means", "m0": 1.0, "m1": 2.0}, "eps": 0.3}"#).unwrap();
    let out = run(dir.path(), &["lfd", "--config", "wide.json"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("not disjoint"));
}
