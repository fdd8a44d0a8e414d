//! Shipped systems and the fixture file format.
//!
//! A fixture file is TOML:
//!
//! ```toml
//! name = "golden"
//! vertex_count = 2
//!
//! [[edge]]
//! source = 0
//! target = 0
//! roof = 1.0
//! potential = 0.0
//! label = []
//! ```
//!
//! Unknown keys are rejected. All edges must carry labels of equal length.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::shift::{EdgeFunction, MarkovShift};
use super::system::SuspensionSystem;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FixtureFile {
    #[serde(default)]
    pub name: String,
    pub vertex_count: usize,
    #[serde(rename = "edge")]
    pub edges: Vec<FixtureEdge>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FixtureEdge {
    pub source: usize,
    pub target: usize,
    pub roof: f64,
    #[serde(default)]
    pub potential: f64,
    #[serde(default)]
    pub label: Vec<i64>,
}

impl FixtureFile {
    pub fn to_system(&self) -> Result<SuspensionSystem> {
        let pairs: Vec<(usize, usize)> = self.edges.iter().map(|e| (e.source, e.target)).collect();
        SuspensionSystem::new(
            MarkovShift::new(self.vertex_count, &pairs)?,
            EdgeFunction::new(self.edges.iter().map(|e| e.roof).collect())?,
            EdgeFunction::new(self.edges.iter().map(|e| e.potential).collect())?,
            self.edges.iter().map(|e| e.label.clone()).collect(),
        )
    }

    pub fn from_system(name: &str, sys: &SuspensionSystem) -> Self {
        let shift = sys.shift();
        Self {
            name: name.to_string(),
            vertex_count: shift.vertex_count(),
            edges: (0..shift.edge_count())
                .map(|e| FixtureEdge {
                    source: shift.source(e),
                    target: shift.target(e),
                    roof: sys.roof()[e],
                    potential: sys.potential()[e],
                    label: sys.label(e).to_vec(),
                })
                .collect(),
        }
    }
}

pub fn parse_fixture(text: &str) -> Result<SuspensionSystem> {
    let file: FixtureFile = toml::from_str(text)?;
    file.to_system()
}

pub fn load_fixture(path: &Path) -> Result<SuspensionSystem> {
    parse_fixture(&std::fs::read_to_string(path)?)
}

pub fn save_fixture(path: &Path, name: &str, sys: &SuspensionSystem) -> Result<()> {
    std::fs::write(path, toml::to_string(&FixtureFile::from_system(name, sys))?)?;
    Ok(())
}

/// Rounds to twelve significant decimals, the precision at which irrational
/// roof constants are frozen.
fn r12(x: f64) -> f64 {
    format!("{x:.11e}").parse().expect("round trip")
}

const NAMES: &[&str] = &[
    "full2", "full2-wm", "golden", "full3", "sym2", "sym4", "asym3", "pos1", "b2-full4", "template",
];

pub fn fixture_names() -> &'static [&'static str] {
    NAMES
}

/// Built-in fixtures:
///
/// * `full2`, `full3`, `golden` — unit roof, zero potential, no homology;
/// * `full2-wm` — full 2-shift with roofs `1, √2` (weak mixing);
/// * `sym2` — full 2-shift, unit roof, labels `±1` (lattice: all lengths are
///   integers);
/// * `sym4` — full 4-shift, labels `+1, −1, 0, 0`, roofs `1, 1, √2, √3`
///   (symmetric and weak mixing);
/// * `asym3` — full 3-shift, unit roof, labels `+1, +1, −1`;
/// * `pos1` — full 2-shift with both labels `+1` (not homologically full);
/// * `b2-full4` — full 4-shift, labels `(±1, 0), (0, ±1)`;
/// * `template` — full 2-shift with unit roof used for the knot template.
pub fn fixture(name: &str) -> Result<SuspensionSystem> {
    let full = |n: usize, roof: Vec<f64>, labels: Vec<Vec<i64>>| {
        SuspensionSystem::new(MarkovShift::full(n)?, EdgeFunction::new(roof)?, EdgeFunction::zeros(n), labels)
    };
    match name {
        "full2" | "template" => full(2, vec![1.0; 2], vec![vec![]; 2]),
        "full3" => full(3, vec![1.0; 3], vec![vec![]; 3]),
        "full2-wm" => full(2, vec![1.0, r12(2f64.sqrt())], vec![vec![]; 2]),
        "golden" => SuspensionSystem::unlabelled(
            MarkovShift::golden_mean(),
            EdgeFunction::constant(3, 1.0),
            EdgeFunction::zeros(3),
        ),
        "sym2" => full(2, vec![1.0; 2], vec![vec![1], vec![-1]]),
        "sym4" => full(
            4,
            vec![1.0, 1.0, r12(2f64.sqrt()), r12(3f64.sqrt())],
            vec![vec![1], vec![-1], vec![0], vec![0]],
        ),
        "asym3" => full(3, vec![1.0; 3], vec![vec![1], vec![1], vec![-1]]),
        "pos1" => full(2, vec![1.0; 2], vec![vec![1], vec![1]]),
        "b2-full4" => full(4, vec![1.0; 4], vec![vec![1, 0], vec![-1, 0], vec![0, 1], vec![0, -1]]),
        other => Err(Error::Config(format!(
            "unknown fixture {other:?}; known fixtures: {}",
            NAMES.join(", ")
        ))),
    }
}
