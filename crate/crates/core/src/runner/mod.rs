//! Configuration-driven experiments.
//!
//! An [`ExperimentConfig`] (TOML, see [`CONFIG_VERSION`]) names a fixture,
//! one operation and its parameters. [`run`] executes it inside a rayon pool
//! of the requested size, writes CSV tables with 12 significant digits and
//! finishes with a [`RunManifest`] holding the resolved configuration and
//! the SHA-256 of every emitted file. Outputs do not depend on the thread
//! count.

mod config;
mod manifest;
mod ops;
mod run;

pub use config::{
    AverageLinkParams, BetaParams, Check, ClassParams, ExperimentConfig, HelicityParams, LambdaScanParams, LinkParams,
    Operation, OrbitsParams, PressureParams, CONFIG_VERSION,
};
pub use manifest::{sha256_hex, CheckOutcome, OutputFile, RunManifest, RunStatus, StageTiming, MANIFEST_FILE};
pub use run::{replay, run, RunOptions, RunReport, OUTPUT_ENV};
