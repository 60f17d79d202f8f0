//! The `latarb` pipeline: ingest → vol → latency → bounds → excess /
//! implied-gamma, plus the `simulate` oracle stage.
//!
//! Stages communicate through files in the output directory. Every stage
//! writes a manifest with the config hash and input digests; downstream
//! stages refuse stale upstream artifacts. Artifact writes go through a
//! write-temp-then-rename so interrupted runs never leave half files, and
//! no artifact embeds wall-clock time, so identical inputs, config, and
//! seed reproduce identical bytes.

pub mod config;
pub mod covariates;
pub mod manifest;
mod stages;

pub use config::{Inputs, PipelineConfig, SimulateSettings};
pub use manifest::Manifest;
pub use stages::{run_simulate_report, SimulateReport};

use std::path::Path;

use crate::error::Result;

/// Pipeline stages, in dependency order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Ingest,
    Vol,
    Latency,
    Bounds,
    Excess,
    ImpliedGamma,
    Simulate,
}

impl Stage {
    pub fn name(self) -> &'static str {
        match self {
            Stage::Ingest => "ingest",
            Stage::Vol => "vol",
            Stage::Latency => "latency",
            Stage::Bounds => "bounds",
            Stage::Excess => "excess",
            Stage::ImpliedGamma => "implied-gamma",
            Stage::Simulate => "simulate",
        }
    }
}

/// Run one stage under the given configuration.
pub fn run(stage: Stage, cfg: &PipelineConfig) -> Result<()> {
    cfg.validate()?;
    std::fs::create_dir_all(&cfg.output_dir)?;
    match stage {
        Stage::Ingest => stages::run_ingest(cfg),
        Stage::Vol => stages::run_vol(cfg),
        Stage::Latency => stages::run_latency(cfg),
        Stage::Bounds => stages::run_bounds(cfg),
        Stage::Excess => stages::run_excess(cfg),
        Stage::ImpliedGamma => stages::run_implied_gamma(cfg),
        Stage::Simulate => stages::run_simulate(cfg),
    }
}

/// Write a file atomically: temp file in the same directory, then rename.
pub(crate) fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    let tmp = dir.join(format!(
        ".{}.tmp",
        path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_else(|| "artifact".into())
    ));
    std::fs::write(&tmp, bytes)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}
