use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn relnam(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_relnam")).args(args).output().unwrap()
}

fn ok(args: &[&str]) {
    let out = relnam(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
}

fn p(dir: &Path, rel: &str) -> String {
    dir.join(rel).to_string_lossy().into_owned()
}

#[test]
fn simulate_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    for out in ["a", "b"] {
        ok(&["simulate", "--nodes", "100", "--events", "5000", "--seed", "7", "--out", &p(dir.path(), out)]);
    }
    let a = fs::read(dir.path().join("a/events.csv")).unwrap();
    assert_eq!(a, fs::read(dir.path().join("b/events.csv")).unwrap());
    assert!(String::from_utf8_lossy(&a).starts_with("sender,receiver,time,x1,x2\n"));
    ok(&["simulate", "--nodes", "100", "--events", "5000", "--seed", "8", "--out", &p(dir.path(), "c")]);
    assert_ne!(a, fs::read(dir.path().join("c/events.csv")).unwrap());
}

#[test]
fn missing_input_exits_one_naming_path() {
    let dir = tempfile::tempdir().unwrap();
    let missing = p(dir.path(), "nowhere/pairs.csv");
    let out = relnam(&["fit", "--pairs", &missing, "--out", &p(dir.path(), "fit")]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains(&missing), "{err}");
    assert_eq!(err.trim_end().lines().count(), 1);
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(relnam(&["fit", "--bogus"]).status.code(), Some(2));
    assert_eq!(relnam(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(relnam(&["curves", "--models", "x", "--kernel", "cubic", "--out", "y"]).status.code(), Some(2));
}

#[test]
fn domain_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = relnam(&["simulate", "--nodes", "1", "--events", "5", "--out", &p(dir.path(), "s")]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error: "));
}

#[test]
fn pipeline_writes_curves_and_report() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(&["simulate", "--nodes", "120", "--events", "3000", "--seed", "1", "--out", &p(d, "sim")]);
    ok(&[
        "sample", "--events", &p(d, "sim/events.csv"), "--nodes", &p(d, "sim/nodes.csv"),
        "--truth", &p(d, "sim/truth.json"), "--seed", "2", "--out", &p(d, "smp"),
    ]);
    ok(&["--jobs", "2", "bootstrap", "--pairs", &p(d, "smp/pairs.csv"), "--arch", "16-16", "--epochs", "4", "--refits", "2", "--out", &p(d, "boot")]);
    assert!(d.join("boot/model_b0.json").exists() && d.join("boot/model_b1.json").exists());
    ok(&["curves", "--models", &p(d, "boot"), "--grid-points", "25", "--kernel", "rbf-squared", "--out", &p(d, "curves")]);
    let curves = fs::read_to_string(d.join("curves/curves_k1.csv")).unwrap();
    assert!(curves.starts_with("x,mean,lower,upper,boot_0,boot_1\n"));
    assert_eq!(curves.lines().count(), 26);
    ok(&[
        "score", "--pairs", &p(d, "smp/pairs.csv"), "--model", &p(d, "boot/model_b0.json"),
        "--truth", &p(d, "sim/truth.json"), "--curves", &p(d, "curves"), "--out", &p(d, "score"),
    ]);
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(d.join("score/report.json")).unwrap()).unwrap();
    assert_eq!(report["pairs"], 3000);
    assert_eq!(report["curve_rmse"].as_array().unwrap().len(), 2);
    for stage in ["sim", "smp", "boot", "curves", "score"] {
        let m: serde_json::Value = serde_json::from_str(&fs::read_to_string(d.join(stage).join("manifest.json")).unwrap()).unwrap();
        assert_eq!(m["format"], "relnam-manifest/1");
        assert!(m["config"].is_object());
    }
}

#[test]
fn replay_reproduces_fit() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(&["simulate", "--nodes", "60", "--events", "1500", "--seed", "4", "--out", &p(d, "sim")]);
    ok(&["sample", "--events", &p(d, "sim/events.csv"), "--nodes", &p(d, "sim/nodes.csv"), "--covariates", "sender:0,receiver:0", "--out", &p(d, "smp")]);
    ok(&["fit", "--pairs", &p(d, "smp/pairs.csv"), "--arch", "8", "--dropout", "0.1", "--epochs", "2", "--seed", "3", "--out", &p(d, "fit")]);
    ok(&["replay", &p(d, "fit/manifest.json"), "--out", &p(d, "again")]);
    for f in ["model.json", "loss.csv"] {
        assert_eq!(fs::read(d.join("fit").join(f)).unwrap(), fs::read(d.join("again").join(f)).unwrap());
    }
}
