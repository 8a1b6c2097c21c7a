use std::path::Path;
use std::process::{Command, Output};

fn hct(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hct")).current_dir(dir).args(args).output().expect("run hct")
}

fn json(out: &Output) -> serde_json::Value {
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("json output")
}

fn write(dir: &Path, name: &str, text: &str) {
    std::fs::write(dir.join(name), text).unwrap();
}

#[test]
fn content_of_a_diagonal() {
    let dir = tempfile::tempdir().unwrap();
    // Four diagonal cells of a 4×4 grid: covering by the two level-1 diagonal cubes costs 1.
    write(dir.path(), "diag.txt", "2 2 1\n2 0 0\n2 1 1\n2 2 2\n2 3 3\n");
    let v = json(&hct(dir.path(), &["content", "--set", "diag.txt", "--beta", "1", "--tree-out", "tree.json"]));
    assert!((v["content"].as_f64().unwrap() - 1.0).abs() < 1e-12);
    let tree: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("tree.json")).unwrap()).unwrap();
    assert_eq!(tree["0:0,0"], v["content"]);
    let v = json(&hct(dir.path(), &["content", "--set", "diag.txt", "--beta", "2"]));
    assert!((v["content"].as_f64().unwrap() - 0.25).abs() < 1e-12);
}

#[test]
fn choquet_of_a_constant() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "f.csv", "1 2 1\n3,3,3,3\n");
    let v = json(&hct(dir.path(), &["choquet", "--fn", "f.csv", "--beta", "0.5", "--p", "2", "--weak"]));
    assert!((v["integral"].as_f64().unwrap() - 3.0).abs() < 1e-12);
    assert!((v["lp_norm"].as_f64().unwrap() - 3.0).abs() < 1e-12);
    assert!((v["weak_lp_norm"].as_f64().unwrap() - 3.0).abs() < 1e-12);
}

#[test]
fn operator_field_round_trips_through_binary() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "f.csv", "2 2 1\n1,2,3,4\n0,0,0,0\n1,1,1,1\n5,0,0,0\n");
    let out = hct(dir.path(), &["op", "--which", "maximal", "--fn", "f.csv", "--beta", "2", "--out", "m.bin"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let field = hct_core::io::read_function(&dir.path().join("m.bin")).unwrap();
    let f = hct_core::io::read_function(&dir.path().join("f.csv")).unwrap();
    assert!(field.values().iter().zip(f.values()).all(|(m, v)| m >= v));
}

#[test]
fn missing_parameter_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "f.csv", "1 1 1\n1,2\n");
    let out = hct(dir.path(), &["op", "--which", "sharp", "--fn", "f.csv"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--beta"));
}

#[test]
fn cz_rejects_a_saturated_root() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "f.csv", "1 2 1\n4,4,4,4\n");
    let out = hct(dir.path(), &["cz", "--fn", "f.csv", "--beta", "1", "--lambda", "1"]);
    assert_eq!(out.status.code(), Some(2));
    write(dir.path(), "g.csv", "1 2 1\n8,0,0,0\n");
    let v = json(&hct(dir.path(), &["cz", "--fn", "g.csv", "--beta", "1", "--lambda", "4"]));
    assert_eq!(v["certificate"]["non_overlapping"], true);
    assert!(!v["cubes"].as_array().unwrap().is_empty());
}

#[test]
fn pack_reports_a_certificate() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "fam.txt", "2 3 1\n2 0 0\n2 0 1\n2 1 0\n2 1 1\n");
    let v = json(&hct(dir.path(), &["pack", "--family", "fam.txt", "--beta", "1"]));
    assert_eq!(v["certificate"]["coverage"], true);
    assert_eq!(v["certificate"]["packing"], true);
}

#[test]
fn riesz_variants() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "m.txt", "2 2 1\n5,1\n");
    for args in [&["--out", "a.csv"][..], &["--dyadic", "--shift", "3", "--out", "b.csv"], &["--combined", "--out", "c.csv"]] {
        let mut all = vec!["riesz", "--measure", "m.txt", "--alpha", "1"];
        all.extend_from_slice(args);
        let out = hct(dir.path(), &all);
        assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    }
    for f in ["a.csv", "b.csv", "c.max.csv", "c.sum.csv"] {
        let field = hct_core::io::read_function(&dir.path().join(f)).unwrap();
        assert!(field.values().iter().all(|v| v.is_finite() && *v >= 0.0), "{f}");
        assert!(field.values()[5] > 0.0, "{f}");
    }
    let out = hct(dir.path(), &["riesz", "--measure", "m.txt", "--alpha", "1", "--dyadic", "--shift", "9"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn verify_writes_a_report_and_sets_the_exit_code() {
    let dir = tempfile::tempdir().unwrap();
    write(
        dir.path(),
        "ok.json",
        r#"{"experiment": "embedding", "grid": {"dim": 2, "levels": 3}, "inputs": [{"generator": {"kind": "random-step", "levels": 4}, "count": 3}]}"#,
    );
    let out = hct(dir.path(), &["verify", "--config", "ok.json", "--out", "report", "--seed", "7", "--jobs", "2"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("report/report.json")).unwrap()).unwrap();
    assert_eq!(report["config"]["inputs"][0]["seed"], 7);
    assert!(dir.path().join("report/cases.csv").exists());

    write(dir.path(), "bad.json", r#"{"experiment": "nope"}"#);
    assert_eq!(hct(dir.path(), &["verify", "--config", "bad.json"]).status.code(), Some(2));
    write(dir.path(), "typo.json", r#"{"experiment": "weak11", "tolerence": {}}"#);
    assert_eq!(hct(dir.path(), &["verify", "--config", "typo.json"]).status.code(), Some(2));
}

#[test]
fn verify_fails_when_a_verdict_fails() {
    let dir = tempfile::tempdir().unwrap();
    // A negative stability tolerance cannot be met.
    write(
        dir.path(),
        "strict.json",
        r#"{"experiment": "weak11", "grid": {"dim": 1, "levels": 4}, "params": {"beta": [1]},
            "inputs": [{"generator": {"kind": "random-step", "levels": 2}}], "tolerances": {"stability": -1}}"#,
    );
    let out = hct(dir.path(), &["verify", "--config", "strict.json"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stdout).contains("FAIL"));
}
