//! End-to-end runs through the configuration layer.

use orbitlink::runner::{replay, run, ExperimentConfig, RunManifest, RunOptions, RunStatus, MANIFEST_FILE};
use orbitlink::symbolic::{fixture, save_fixture};

fn opts(dir: &std::path::Path) -> RunOptions {
    RunOptions { out_dir: Some(dir.to_path_buf()), ..RunOptions::default() }
}

#[test]
fn fixture_file_is_resolved_relative_to_the_config() {
    let dir = tempfile::tempdir().unwrap();
    save_fixture(&dir.path().join("gm.toml"), "gm", &fixture("golden").unwrap()).unwrap();
    let cfg_path = dir.path().join("experiment.toml");
    std::fs::write(
        &cfg_path,
        "version = 1\nfixture_file = \"gm.toml\"\noperation = \"pressure\"\n\n[[check]]\nquantity = \"pressure\"\nexpected = 0.481212\ntolerance = 1e-6\n",
    )
    .unwrap();
    let out = dir.path().join("out");
    let report = run(ExperimentConfig::load(&cfg_path).unwrap(), &RunOptions { verify: true, ..opts(&out) }).unwrap();
    assert!(report.passed());
    assert!((report.summary_value("pressure").unwrap() - 0.481211825060).abs() < 1e-11);

    // The manifest records an absolute fixture path, so it replays from
    // anywhere.
    let manifest = RunManifest::load(&out.join(MANIFEST_FILE)).unwrap();
    let elsewhere = tempfile::tempdir().unwrap();
    assert!(replay(&manifest, elsewhere.path(), Some(3)).unwrap().is_empty());
}

#[test]
fn missing_check_quantity_fails_verification() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = ExperimentConfig::parse(
        "version = 1\nfixture = \"golden\"\noperation = \"orbits\"\n[orbits]\nwindow = [0.0, 6.0]\n\n[[check]]\nquantity = \"orbits\"\nmin = 1.0\n\n[[check]]\nquantity = \"no_such_thing\"\nmin = 0.0\n",
    )
    .unwrap();
    let report = run(cfg, &RunOptions { verify: true, ..opts(dir.path()) }).unwrap();
    assert_eq!(report.manifest.status, RunStatus::Ok);
    assert!(report.manifest.checks[0].passed);
    assert_eq!(report.manifest.checks[1].value, "missing");
    assert!(!report.passed());
}

#[test]
fn sections_for_other_operations_are_rejected() {
    let cfg = ExperimentConfig::parse("version = 1\nfixture = \"golden\"\noperation = \"pressure\"\n[helicity]\nstrata = 4\n").unwrap();
    let dir = tempfile::tempdir().unwrap();
    let err = run(cfg, &opts(&dir.path().join("o"))).unwrap_err().to_string();
    assert!(err.contains("helicity"), "{err}");
}

#[test]
fn potential_shift_moves_pressure_by_the_constant() {
    let dir = tempfile::tempdir().unwrap();
    let base = run(ExperimentConfig::parse("version = 1\nfixture = \"full2\"\noperation = \"pressure\"\n").unwrap(), &opts(&dir.path().join("a")))
        .unwrap();
    let shifted = run(
        ExperimentConfig::parse("version = 1\nfixture = \"full2\"\noperation = \"pressure\"\npotential_shift = -0.25\n").unwrap(),
        &opts(&dir.path().join("b")),
    )
    .unwrap();
    let (p, q) = (base.summary_value("pressure").unwrap(), shifted.summary_value("pressure").unwrap());
    assert!((p - q - 0.25).abs() < 1e-11, "{p} {q}");
}
