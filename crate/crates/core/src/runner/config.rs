use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::helicity::StudyParams;
use crate::knots::TemplateSpec;
use crate::symbolic::{fixture, fixture_names, load_fixture, CountMethod, SuspensionSystem};

/// Schema version understood by this build.
pub const CONFIG_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Operation {
    Pressure,
    Orbits,
    Beta,
    Count,
    Equidistribute,
    Ld,
    Link,
    LambdaScan,
    Helicity,
    AverageLink,
    Study,
}

impl Operation {
    pub const ALL: [Operation; 11] = [
        Operation::Pressure,
        Operation::Orbits,
        Operation::Beta,
        Operation::Count,
        Operation::Equidistribute,
        Operation::Ld,
        Operation::Link,
        Operation::LambdaScan,
        Operation::Helicity,
        Operation::AverageLink,
        Operation::Study,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Operation::Pressure => "pressure",
            Operation::Orbits => "orbits",
            Operation::Beta => "beta",
            Operation::Count => "count",
            Operation::Equidistribute => "equidistribute",
            Operation::Ld => "ld",
            Operation::Link => "link",
            Operation::LambdaScan => "lambda-scan",
            Operation::Helicity => "helicity",
            Operation::AverageLink => "average-link",
            Operation::Study => "study",
        }
    }

    pub fn parse(name: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|o| o.name() == name)
            .ok_or_else(|| Error::Config(format!("unknown operation {name:?}")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PressureParams {
    /// Multiplier of the fixture potential.
    pub potential_scale: f64,
}

impl Default for PressureParams {
    fn default() -> Self {
        Self { potential_scale: 1.0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OrbitsParams {
    /// Length window `(lo, hi]`.
    pub window: [f64; 2],
    pub budget: usize,
}

impl Default for OrbitsParams {
    fn default() -> Self {
        Self { window: [0.0, 10.0], budget: 1_000_000 }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BetaParams {
    /// Word-length horizon of the homological fullness check.
    pub horizon: Option<usize>,
}

/// Shared by the class-restricted operations.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ClassParams {
    pub alpha: Vec<i64>,
    pub t_grid: Vec<f64>,
    /// Window `(T + offsets[0], T + offsets[1]]`.
    pub offsets: [f64; 2],
    pub method: CountMethod,
    /// Edge whose indicator (as a time density) is the test observable.
    pub psi_edge: usize,
    /// Margin of the large-deviation set.
    pub epsilon: f64,
}

impl Default for ClassParams {
    fn default() -> Self {
        Self {
            alpha: vec![0],
            t_grid: (10..=14).map(f64::from).collect(),
            offsets: [-1.0, 0.0],
            method: CountMethod::Auto,
            psi_edge: 0,
            epsilon: 0.2,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LinkParams {
    /// Orbits with length in `(lo, hi]` are paired with each other.
    pub window: [f64; 2],
    pub samples_per_symbol: usize,
    pub template: TemplateSpec,
}

impl Default for LinkParams {
    fn default() -> Self {
        Self { window: [0.0, 5.0], samples_per_symbol: 8, template: TemplateSpec::default() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LambdaScanParams {
    pub window: [f64; 2],
    pub samples: usize,
    /// Exponent of the lowest decade `[10^lowest, 10^{lowest+1})`.
    pub lowest: i32,
    pub decades: usize,
    pub template: TemplateSpec,
}

impl Default for LambdaScanParams {
    fn default() -> Self {
        Self { window: [0.0, 5.0], samples: 100_000, lowest: -3, decades: 3, template: TemplateSpec::default() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HelicityParams {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub wavenumber: u32,
    /// Cutoff ladder of the volume double integral; empty skips it.
    pub deltas: Vec<f64>,
    /// Strata per axis of each volume sample.
    pub strata: usize,
    pub scan_samples: usize,
}

impl Default for HelicityParams {
    fn default() -> Self {
        Self {
            a: 1.0,
            b: 1.0,
            c: 1.0,
            wavenumber: 1,
            deltas: vec![0.2, 0.1, 0.05, 0.025],
            strata: 12,
            scan_samples: 20_000,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AverageLinkParams {
    pub t_grid: Vec<f64>,
    pub samples_per_symbol: usize,
    /// Restrict the partner family to the zero class as well.
    pub partner_class_zero: bool,
    pub template: TemplateSpec,
}

impl Default for AverageLinkParams {
    fn default() -> Self {
        Self {
            t_grid: (4..=8).map(f64::from).collect(),
            samples_per_symbol: 4,
            partner_class_zero: false,
            template: TemplateSpec::default(),
        }
    }
}

/// An assertion on a named summary quantity, checked under `--verify`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Check {
    pub quantity: String,
    pub expected: Option<f64>,
    pub tolerance: Option<f64>,
    pub min: Option<f64>,
    pub max: Option<f64>,
}

impl Check {
    pub fn holds(&self, value: f64) -> bool {
        let near = match (self.expected, self.tolerance) {
            (Some(e), Some(t)) => (value - e).abs() <= t,
            _ => true,
        };
        near && self.min.is_none_or(|m| value >= m) && self.max.is_none_or(|m| value <= m)
    }
}

/// One experiment.
///
/// ```toml
/// version = 1
/// fixture = "golden"
/// operation = "pressure"
/// seed = 0
///
/// [[check]]
/// quantity = "pressure"
/// expected = 0.481212
/// tolerance = 1e-6
/// ```
///
/// Each operation reads its own optional section (`[count]`, `[study]`, …);
/// sections of other operations are rejected.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub version: u32,
    /// Built-in fixture name; ignored when `fixture_file` is given.
    #[serde(default)]
    pub fixture: Option<String>,
    /// Fixture file, relative to the configuration file.
    #[serde(default)]
    pub fixture_file: Option<PathBuf>,
    #[serde(default)]
    pub operation: Option<Operation>,
    #[serde(default)]
    pub seed: u64,
    /// Constant added to the flow potential, `φ ↦ φ + c`.
    #[serde(default)]
    pub potential_shift: f64,
    #[serde(default)]
    pub output: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pressure: Option<PressureParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub orbits: Option<OrbitsParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<BetaParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub count: Option<ClassParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub equidistribute: Option<ClassParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ld: Option<ClassParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub link: Option<LinkParams>,
    #[serde(default, rename = "lambda-scan", skip_serializing_if = "Option::is_none")]
    pub lambda_scan: Option<LambdaScanParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub helicity: Option<HelicityParams>,
    #[serde(default, rename = "average-link", skip_serializing_if = "Option::is_none")]
    pub average_link: Option<AverageLinkParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub study: Option<StudyParams>,
    #[serde(default, rename = "check", skip_serializing_if = "Vec::is_empty")]
    pub checks: Vec<Check>,
    /// Directory of the configuration file, used to resolve relative paths.
    #[serde(skip)]
    pub base_dir: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn new(fixture: &str, operation: Operation) -> Self {
        Self {
            version: CONFIG_VERSION,
            fixture: Some(fixture.into()),
            fixture_file: None,
            operation: Some(operation),
            seed: 0,
            potential_shift: 0.0,
            output: None,
            pressure: None,
            orbits: None,
            beta: None,
            count: None,
            equidistribute: None,
            ld: None,
            link: None,
            lambda_scan: None,
            helicity: None,
            average_link: None,
            study: None,
            checks: Vec::new(),
            base_dir: None,
        }
    }

    /// Parses TOML text. Syntax errors and unknown keys carry the line and
    /// column of the offending key.
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string().trim_end().to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg = Self::parse(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        cfg.base_dir = path.parent().map(Path::to_path_buf);
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }

    pub fn operation(&self) -> Result<Operation> {
        self.operation.ok_or_else(|| Error::Config("operation: not set".into()))
    }

    pub fn system(&self) -> Result<SuspensionSystem> {
        let sys = match (&self.fixture_file, &self.fixture) {
            (Some(path), _) => {
                let full = match &self.base_dir {
                    Some(dir) if path.is_relative() => dir.join(path),
                    _ => path.clone(),
                };
                load_fixture(&full)?
            }
            (None, Some(name)) => fixture(name)?,
            (None, None) => return Err(Error::Config("fixture: one of `fixture` or `fixture_file` is required".into())),
        };
        Ok(if self.potential_shift != 0.0 { sys.add_constant_potential(self.potential_shift) } else { sys })
    }

    fn present_sections(&self) -> Vec<Operation> {
        let mut out = Vec::new();
        let mut mark = |present: bool, op| {
            if present {
                out.push(op)
            }
        };
        mark(self.pressure.is_some(), Operation::Pressure);
        mark(self.orbits.is_some(), Operation::Orbits);
        mark(self.beta.is_some(), Operation::Beta);
        mark(self.count.is_some(), Operation::Count);
        mark(self.equidistribute.is_some(), Operation::Equidistribute);
        mark(self.ld.is_some(), Operation::Ld);
        mark(self.link.is_some(), Operation::Link);
        mark(self.lambda_scan.is_some(), Operation::LambdaScan);
        mark(self.helicity.is_some(), Operation::Helicity);
        mark(self.average_link.is_some(), Operation::AverageLink);
        mark(self.study.is_some(), Operation::Study);
        out
    }

    /// Checks every invariant that does not require running the experiment.
    /// Messages name the offending key.
    pub fn validate(&self) -> Result<()> {
        let err = |key: &str, msg: String| Err(Error::Config(format!("{key}: {msg}")));
        if self.version != CONFIG_VERSION {
            return err("version", format!("unsupported schema version {} (expected {CONFIG_VERSION})", self.version));
        }
        let op = self.operation()?;
        if self.fixture_file.is_none() {
            match &self.fixture {
                None => return err("fixture", "missing".into()),
                Some(name) if !fixture_names().contains(&name.as_str()) => {
                    return err("fixture", format!("unknown fixture {name:?}; known: {}", fixture_names().join(", ")))
                }
                _ => {}
            }
        }
        if !self.potential_shift.is_finite() {
            return err("potential_shift", "must be finite".into());
        }
        if let Some(other) = self.present_sections().into_iter().find(|s| *s != op) {
            return err(other.name(), format!("section does not apply to operation {:?}", op.name()));
        }
        for (i, c) in self.checks.iter().enumerate() {
            let key = format!("check[{i}]");
            if c.quantity.is_empty() {
                return err(&key, "quantity is empty".into());
            }
            if c.expected.is_some() != c.tolerance.is_some() {
                return err(&key, "`expected` and `tolerance` go together".into());
            }
            if c.tolerance.is_some_and(|t| !(t > 0.0)) {
                return err(&key, "tolerance must be positive".into());
            }
            if c.expected.is_none() && c.min.is_none() && c.max.is_none() {
                return err(&key, "needs `expected`, `min` or `max`".into());
            }
        }
        match op {
            Operation::Pressure => {
                if !self.pressure.clone().unwrap_or_default().potential_scale.is_finite() {
                    return err("pressure.potential_scale", "must be finite".into());
                }
            }
            Operation::Orbits => {
                let p = self.orbits.clone().unwrap_or_default();
                window_ok("orbits.window", p.window)?;
                if p.budget == 0 {
                    return err("orbits.budget", "must be positive".into());
                }
            }
            Operation::Beta => {}
            Operation::Count | Operation::Equidistribute | Operation::Ld => {
                let (key, p) = match op {
                    Operation::Count => ("count", self.count.clone()),
                    Operation::Equidistribute => ("equidistribute", self.equidistribute.clone()),
                    _ => ("ld", self.ld.clone()),
                };
                let p = p.unwrap_or_default();
                grid_ok(&format!("{key}.t_grid"), &p.t_grid)?;
                if !(p.offsets[0] < p.offsets[1]) || !p.offsets.iter().all(|x| x.is_finite()) {
                    return err(&format!("{key}.offsets"), "need finite offsets[0] < offsets[1]".into());
                }
                if !(p.epsilon > 0.0) {
                    return err(&format!("{key}.epsilon"), "must be positive".into());
                }
            }
            Operation::Link => {
                let p = self.link.clone().unwrap_or_default();
                window_ok("link.window", p.window)?;
                if p.samples_per_symbol < 4 {
                    return err("link.samples_per_symbol", "must be at least 4".into());
                }
                p.template.validate().map_err(|e| Error::Config(format!("link.template: {e}")))?;
            }
            Operation::LambdaScan => {
                let p = self.lambda_scan.clone().unwrap_or_default();
                window_ok("lambda-scan.window", p.window)?;
                if p.samples == 0 || p.decades == 0 {
                    return err("lambda-scan", "samples and decades must be positive".into());
                }
                p.template.validate().map_err(|e| Error::Config(format!("lambda-scan.template: {e}")))?;
            }
            Operation::Helicity => {
                let p = self.helicity.clone().unwrap_or_default();
                if ![p.a, p.b, p.c].iter().all(|x| x.is_finite()) {
                    return err("helicity", "coefficients must be finite".into());
                }
                if p.deltas.iter().any(|d| !(*d > 0.0 && d.is_finite())) || p.deltas.windows(2).any(|w| w[1] >= w[0]) {
                    return err("helicity.deltas", "must be positive and strictly decreasing".into());
                }
                if p.strata == 0 || p.scan_samples == 0 {
                    return err("helicity", "strata and scan_samples must be positive".into());
                }
            }
            Operation::AverageLink => {
                let p = self.average_link.clone().unwrap_or_default();
                grid_ok("average-link.t_grid", &p.t_grid)?;
                if p.samples_per_symbol < 4 {
                    return err("average-link.samples_per_symbol", "must be at least 4".into());
                }
                p.template.validate().map_err(|e| Error::Config(format!("average-link.template: {e}")))?;
            }
            Operation::Study => {
                let p = self.study.clone().unwrap_or_default();
                p.validate().map_err(|e| Error::Config(format!("study: {e}")))?;
            }
        }
        Ok(())
    }
}

fn window_ok(key: &str, w: [f64; 2]) -> Result<()> {
    if w.iter().all(|x| x.is_finite()) && w[0] >= 0.0 && w[0] < w[1] {
        Ok(())
    } else {
        Err(Error::Config(format!("{key}: need 0 <= lo < hi, got {w:?}")))
    }
}

fn grid_ok(key: &str, grid: &[f64]) -> Result<()> {
    if grid.is_empty() || grid.iter().any(|t| !(t.is_finite() && *t > 0.0)) || grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Config(format!("{key}: must be non-empty, positive and strictly increasing")));
    }
    Ok(())
}
