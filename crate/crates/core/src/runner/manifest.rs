use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::Result;

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RunStatus {
    /// Written before any work starts; seen only if the run died.
    Running,
    Failed,
    Ok,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OutputFile {
    pub file: String,
    pub bytes: usize,
    pub sha256: String,
}

impl OutputFile {
    pub fn of(file: &str, contents: &[u8]) -> Self {
        Self { file: file.to_string(), bytes: contents.len(), sha256: sha256_hex(contents) }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageTiming {
    pub stage: String,
    pub seconds: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckOutcome {
    pub quantity: String,
    /// Twelve significant digits, or `missing`.
    pub value: String,
    pub passed: bool,
}

/// Record of one run, written last into the output directory.
///
/// Everything needed to reproduce the emitted files is in `config` (the
/// resolved configuration, including the seed). Timings and the thread
/// count are recorded but never influence the outputs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub status: RunStatus,
    pub error: Option<String>,
    pub operation: String,
    pub config: String,
    pub seed: u64,
    pub threads: Option<usize>,
    pub parallel: bool,
    pub wall_clock_seconds: f64,
    pub stages: Vec<StageTiming>,
    pub outputs: Vec<OutputFile>,
    pub summary: BTreeMap<String, String>,
    pub verify: bool,
    pub checks: Vec<CheckOutcome>,
}

impl RunManifest {
    pub fn load(path: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        std::fs::write(dir.join(MANIFEST_FILE), text)?;
        Ok(())
    }

    /// `true` when every requested check passed (vacuously without checks).
    pub fn checks_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    /// Checksums keyed by file name.
    pub fn checksums(&self) -> BTreeMap<&str, &str> {
        self.outputs.iter().map(|o| (o.file.as_str(), o.sha256.as_str())).collect()
    }

    /// Files whose checksums differ between two runs, including files present
    /// in only one of them.
    pub fn checksum_mismatches(&self, other: &RunManifest) -> Vec<String> {
        let (a, b) = (self.checksums(), other.checksums());
        let mut names: Vec<&str> = a.keys().chain(b.keys()).copied().collect();
        names.sort_unstable();
        names.dedup();
        names.into_iter().filter(|n| a.get(n) != b.get(n)).map(str::to_string).collect()
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn known_digest() {
        assert_eq!(sha256_hex(b"abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    }

    #[test]
    fn mismatches() {
        let m = |files: &[(&str, &[u8])]| RunManifest {
            tool: "t".into(),
            version: "0".into(),
            status: RunStatus::Ok,
            error: None,
            operation: "pressure".into(),
            config: String::new(),
            seed: 0,
            threads: None,
            parallel: false,
            wall_clock_seconds: 0.0,
            stages: vec![],
            outputs: files.iter().map(|(n, c)| OutputFile::of(n, c)).collect(),
            summary: BTreeMap::new(),
            verify: false,
            checks: vec![],
        };
        let a = m(&[("x.csv", b"1"), ("y.csv", b"2")]);
        let b = m(&[("x.csv", b"1"), ("y.csv", b"3"), ("z.csv", b"")]);
        assert_eq!(a.checksum_mismatches(&b), vec!["y.csv", "z.csv"]);
        assert!(a.checksum_mismatches(&a).is_empty());
        let dir = tempfile::tempdir().unwrap();
        a.write(dir.path()).unwrap();
        assert_eq!(RunManifest::load(&dir.path().join(MANIFEST_FILE)).unwrap(), a);
    }
}
