use std::path::Path;
use std::process::{Command, Output};

fn orbitlink(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_orbitlink")).args(args).env_remove("ORBITLINK_OUT").output().unwrap()
}

fn manifest_outputs(dir: &Path) -> String {
    let text = std::fs::read_to_string(dir.join("manifest.json")).unwrap();
    let start = text.find("\"outputs\"").unwrap();
    let end = text.find("\"summary\"").unwrap();
    text[start..end].to_string()
}

#[test]
fn pressure_on_golden_mean() {
    let dir = tempfile::tempdir().unwrap();
    let out = orbitlink(&["pressure", "--fixture", "golden", "--out", dir.path().to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.path().join("pressure.csv")).unwrap();
    let value: f64 = csv.lines().nth(1).unwrap().split(',').nth(1).unwrap().parse().unwrap();
    assert!((value - 0.481212).abs() < 1e-6);
    assert_eq!(csv.lines().count(), 2);
}

#[test]
fn unknown_fixture_exits_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    let out = orbitlink(&["pressure", "--fixture", "no-such", "--out", dir.path().join("o").to_str().unwrap()]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("fixture"));
}

#[test]
fn repeat_runs_have_identical_checksums() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("lambda.toml");
    std::fs::write(&cfg, "version = 1\nfixture = \"template\"\noperation = \"lambda-scan\"\nseed = 4\n[lambda-scan]\nsamples = 5000\n").unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for (out, threads) in [(&a, "1"), (&b, "3")] {
        let r = orbitlink(&["lambda-scan", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "--threads", threads]);
        assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    }
    assert_eq!(manifest_outputs(&a), manifest_outputs(&b));
    // A different seed changes the sampled table.
    let c = dir.path().join("c");
    orbitlink(&["lambda-scan", "--config", cfg.to_str().unwrap(), "--out", c.to_str().unwrap(), "--seed", "5"]);
    assert_ne!(manifest_outputs(&a), manifest_outputs(&c));
}

#[test]
fn verify_sets_the_exit_status() {
    let dir = tempfile::tempdir().unwrap();
    let write = |name: &str, expected: f64| {
        let p = dir.path().join(name);
        std::fs::write(
            &p,
            format!("version = 1\nfixture = \"golden\"\n\n[[check]]\nquantity = \"pressure\"\nexpected = {expected}\ntolerance = 1e-6\n"),
        )
        .unwrap();
        p
    };
    let good = write("good.toml", 0.481212);
    let bad = write("bad.toml", 0.5);
    let out = dir.path().join("o");
    let run = |cfg: &Path| orbitlink(&["pressure", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "--verify"]);
    assert_eq!(run(&good).status.code(), Some(0));
    assert_eq!(run(&bad).status.code(), Some(1));
    // Without --verify the checks are not evaluated.
    let plain = orbitlink(&["pressure", "--config", bad.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(plain.status.code(), Some(0));
}

#[test]
fn mismatched_operation_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    std::fs::write(&cfg, "version = 1\nfixture = \"golden\"\noperation = \"orbits\"\n").unwrap();
    let out = orbitlink(&["pressure", "--config", cfg.to_str().unwrap(), "--out", dir.path().join("o").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}
