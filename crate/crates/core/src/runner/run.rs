use std::path::{Path, PathBuf};
use std::time::Instant;

use super::config::{ExperimentConfig, Operation};
use super::manifest::{CheckOutcome, OutputFile, RunManifest, RunStatus, StageTiming};
use super::ops::{execute, Outcome};
use crate::error::{Error, Result};
use crate::fmt::sig12;

/// Environment variable that overrides the output directory of a config
/// (but not `--out`).
pub const OUTPUT_ENV: &str = "ORBITLINK_OUT";

/// Command-line overrides.
#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    /// Operation requested on the command line; must agree with the config
    /// when both are present.
    pub operation: Option<Operation>,
    pub out_dir: Option<PathBuf>,
    pub threads: Option<usize>,
    pub seed: Option<u64>,
    /// Evaluate the config's checks.
    pub verify: bool,
}

#[derive(Clone, Debug)]
pub struct RunReport {
    pub out_dir: PathBuf,
    pub manifest: RunManifest,
}

impl RunReport {
    /// Exit criterion: the run succeeded and, under `--verify`, every check
    /// passed.
    pub fn passed(&self) -> bool {
        self.manifest.status == RunStatus::Ok && (!self.manifest.verify || self.manifest.checks_passed())
    }

    pub fn summary_value(&self, quantity: &str) -> Option<f64> {
        self.manifest.summary.get(quantity).and_then(|v| v.parse().ok())
    }
}

fn resolve(mut cfg: ExperimentConfig, opts: &RunOptions) -> Result<(ExperimentConfig, Operation, PathBuf)> {
    let op = match (cfg.operation, opts.operation) {
        (Some(a), Some(b)) if a != b => {
            return Err(Error::Config(format!(
                "operation: config selects {:?} but {:?} was requested",
                a.name(),
                b.name()
            )))
        }
        (a, b) => b.or(a).ok_or_else(|| Error::Config("operation: not set".into()))?,
    };
    cfg.operation = Some(op);
    if let Some(seed) = opts.seed {
        cfg.seed = seed;
    }
    // The experiment seed drives every sampled stage; recording it in the
    // study section keeps the manifest's configuration truthful.
    if let Some(study) = cfg.study.as_mut() {
        study.seed = cfg.seed;
    }
    if let (Some(file), Some(base)) = (&cfg.fixture_file, &cfg.base_dir) {
        if file.is_relative() {
            cfg.fixture_file = Some(base.join(file));
        }
    }
    if opts.threads == Some(0) {
        return Err(Error::Config("threads: must be positive".into()));
    }
    cfg.validate()?;
    let out_dir = opts
        .out_dir
        .clone()
        .or_else(|| std::env::var_os(OUTPUT_ENV).map(PathBuf::from))
        .or_else(|| cfg.output.clone())
        .unwrap_or_else(|| PathBuf::from("out"));
    Ok((cfg, op, out_dir))
}

#[cfg(feature = "parallel")]
fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match threads {
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::Config(format!("threads: {e}")))?;
            Ok(pool.install(f))
        }
        None => Ok(f()),
    }
}

#[cfg(not(feature = "parallel"))]
fn with_threads<T: Send>(_threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    Ok(f())
}

/// Runs one experiment and writes its tables and manifest into the output
/// directory.
///
/// Configuration errors are returned before anything is written. Once the
/// output directory exists a manifest is always present: `running` while
/// the experiment executes, then `ok` or `failed`.
pub fn run(cfg: ExperimentConfig, opts: &RunOptions) -> Result<RunReport> {
    let (cfg, op, out_dir) = resolve(cfg, opts)?;
    let config_text = cfg.to_toml()?;
    std::fs::create_dir_all(&out_dir)?;
    let mut manifest = RunManifest {
        tool: "orbitlink".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        status: RunStatus::Running,
        error: None,
        operation: op.name().into(),
        config: config_text,
        seed: cfg.seed,
        threads: opts.threads,
        parallel: cfg!(feature = "parallel"),
        wall_clock_seconds: 0.0,
        stages: Vec::new(),
        outputs: Vec::new(),
        summary: Default::default(),
        verify: opts.verify,
        checks: Vec::new(),
    };
    manifest.write(&out_dir)?;
    let start = Instant::now();
    let result = with_threads(opts.threads, || execute(&cfg, op)).and_then(|r| r);
    manifest.wall_clock_seconds = start.elapsed().as_secs_f64();
    match result.and_then(|outcome| emit(&out_dir, outcome, &mut manifest)) {
        Ok(()) => {
            if opts.verify {
                manifest.checks = cfg
                    .checks
                    .iter()
                    .map(|c| {
                        let value = manifest.summary.get(&c.quantity).and_then(|v| v.parse::<f64>().ok());
                        CheckOutcome {
                            quantity: c.quantity.clone(),
                            value: value.map(sig12).unwrap_or_else(|| "missing".into()),
                            passed: value.is_some_and(|v| c.holds(v)),
                        }
                    })
                    .collect();
            }
            manifest.status = RunStatus::Ok;
            manifest.write(&out_dir)?;
            Ok(RunReport { out_dir, manifest })
        }
        Err(e) => {
            manifest.status = RunStatus::Failed;
            manifest.error = Some(e.to_string());
            manifest.write(&out_dir)?;
            Err(e)
        }
    }
}

fn emit(dir: &Path, outcome: Outcome, manifest: &mut RunManifest) -> Result<()> {
    for (name, bytes) in &outcome.files {
        std::fs::write(dir.join(name), bytes)?;
        manifest.outputs.push(OutputFile::of(name, bytes));
    }
    manifest.stages = outcome.stages.into_iter().map(|(stage, seconds)| StageTiming { stage, seconds }).collect();
    manifest.summary = outcome.summary.into_iter().map(|(k, v)| (k, sig12(v))).collect();
    Ok(())
}

/// Re-runs the configuration recorded in a manifest into `out_dir` and
/// returns the files whose checksums differ.
pub fn replay(manifest: &RunManifest, out_dir: &Path, threads: Option<usize>) -> Result<Vec<String>> {
    let cfg = ExperimentConfig::parse(&manifest.config)?;
    let opts = RunOptions { out_dir: Some(out_dir.to_path_buf()), threads, ..RunOptions::default() };
    let report = run(cfg, &opts)?;
    Ok(manifest.checksum_mismatches(&report.manifest))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::runner::config::Check;
    use crate::runner::manifest::MANIFEST_FILE;

    #[test]
    fn pressure_run_writes_tables_and_manifest() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = ExperimentConfig::new("golden", Operation::Pressure);
        cfg.checks.push(Check { quantity: "pressure".into(), expected: Some(0.481212), tolerance: Some(1e-6), min: None, max: None });
        let opts = RunOptions { out_dir: Some(dir.path().into()), verify: true, ..RunOptions::default() };
        let report = run(cfg.clone(), &opts).unwrap();
        assert!(report.passed());
        let text = std::fs::read_to_string(dir.path().join("pressure.csv")).unwrap();
        assert_eq!(text, "fixture,pressure\ngolden,0.48121182506\n");
        let m = RunManifest::load(&dir.path().join(MANIFEST_FILE)).unwrap();
        assert_eq!(m.status, RunStatus::Ok);
        assert_eq!(m.outputs.len(), 2);
        let again = tempfile::tempdir().unwrap();
        assert!(replay(&m, again.path(), Some(2)).unwrap().is_empty());

        cfg.checks[0].expected = Some(0.5);
        let failing = run(cfg, &opts).unwrap();
        assert!(!failing.passed());
    }

    #[test]
    fn unknown_fixture_fails_before_writing() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("never");
        let opts = RunOptions { out_dir: Some(out.clone()), ..RunOptions::default() };
        let err = run(ExperimentConfig::new("nope", Operation::Pressure), &opts).unwrap_err();
        assert!(err.to_string().contains("fixture"));
        assert!(!out.exists());
    }

    #[test]
    fn runtime_failure_leaves_failed_manifest() {
        let dir = tempfile::tempdir().unwrap();
        // pos1 is not homologically full, so counting fails after start-up.
        let cfg = ExperimentConfig::new("pos1", Operation::Count);
        let opts = RunOptions { out_dir: Some(dir.path().into()), ..RunOptions::default() };
        assert!(run(cfg, &opts).is_err());
        let m = RunManifest::load(&dir.path().join(MANIFEST_FILE)).unwrap();
        assert_eq!(m.status, RunStatus::Failed);
        assert!(m.error.unwrap().contains("homologically full"));
    }

    #[test]
    fn command_line_operation_must_agree() {
        let cfg = ExperimentConfig::new("golden", Operation::Pressure);
        let opts = RunOptions { operation: Some(Operation::Orbits), ..RunOptions::default() };
        assert!(run(cfg, &opts).unwrap_err().to_string().contains("operation"));
    }
}
