//! Pipeline configuration.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::latency::ModelKind;
use crate::orderbook::GridConfig;
use crate::simulator::LatencyLaw;
use crate::time::Day;
use crate::volatility::VolConfig;

/// Input file locations.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Inputs {
    pub orderbooks: PathBuf,
    pub transactions: PathBuf,
    pub blocks: PathBuf,
    pub profiles: PathBuf,
}

/// Settings for the `simulate` oracle stage.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateSettings {
    #[serde(default = "default_sim_paths")]
    pub paths: usize,
    #[serde(default = "default_sim_sigma")]
    pub sigma: f64,
    #[serde(default = "default_sim_gamma")]
    pub gamma: f64,
    /// Latency law for the indifference checks.
    #[serde(default = "default_sim_latency")]
    pub latency: LatencyLaw,
    /// Exponential rate for the Laplace-limit checks.
    #[serde(default = "default_sim_rate")]
    pub exponential_rate: f64,
    #[serde(default = "default_sim_significance")]
    pub significance: f64,
}

fn default_sim_paths() -> usize {
    1_000_000
}
fn default_sim_sigma() -> f64 {
    0.0009
}
fn default_sim_gamma() -> f64 {
    2.0
}
fn default_sim_rate() -> f64 {
    0.1
}
fn default_sim_significance() -> f64 {
    0.01
}
fn default_sim_latency() -> LatencyLaw {
    LatencyLaw::Gamma { shape: 0.62, rate: 0.062 }
}

impl Default for SimulateSettings {
    fn default() -> Self {
        SimulateSettings {
            paths: default_sim_paths(),
            sigma: default_sim_sigma(),
            gamma: default_sim_gamma(),
            latency: default_sim_latency(),
            exponential_rate: default_sim_rate(),
            significance: default_sim_significance(),
        }
    }
}

/// Everything the pipeline stages need. Loaded from TOML, overridable from
/// the command line, and hashed into every artifact manifest. Unknown or
/// misplaced keys are configuration errors rather than silent no-ops.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub inputs: Inputs,
    /// Inclusive date range, `YYYY-MM-DD`.
    #[serde(default)]
    pub from: Option<String>,
    #[serde(default)]
    pub to: Option<String>,
    /// Risk-aversion grid for the bound stages.
    #[serde(default = "default_gamma")]
    pub gamma: Vec<f64>,
    #[serde(default = "default_model_kind")]
    pub latency_model: ModelKind,
    #[serde(default = "default_seed")]
    pub seed: u64,
    /// Worker threads; 0 keeps the rayon default. Not part of the config
    /// hash since it cannot change any artifact byte.
    #[serde(default)]
    pub jobs: usize,
    #[serde(default)]
    pub strict: bool,
    /// Diagnostics only: permit same-day models when the previous day is
    /// missing.
    #[serde(default)]
    pub allow_lookahead: bool,
    #[serde(default)]
    pub volatility: VolConfig,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub simulate: SimulateSettings,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
}

fn default_gamma() -> Vec<f64> {
    vec![2.0]
}
fn default_model_kind() -> ModelKind {
    ModelKind::Gamma
}
fn default_seed() -> u64 {
    42
}
fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

impl PipelineConfig {
    pub fn from_toml_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!(
            "cannot read config {}: {e}",
            path.display()
        )))?;
        let mut cfg: PipelineConfig =
            toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        if let Ok(out) = std::env::var("LATARB_OUT") {
            if !out.is_empty() {
                cfg.output_dir = PathBuf::from(out);
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        match (self.day_from()?, self.day_to()?) {
            (Some(a), Some(b)) if a > b => {
                return Err(Error::Config(format!(
                    "empty date range: from {} is after to {}",
                    a.to_iso(),
                    b.to_iso()
                )))
            }
            _ => {}
        }
        if self.gamma.is_empty() {
            return Err(Error::Config("gamma grid is empty".into()));
        }
        for g in &self.gamma {
            if !(*g > 1.0) {
                return Err(Error::Config(format!(
                    "gamma {g} not admissible: the CRRA bound pipeline needs gamma > 1"
                )));
            }
        }
        if self.simulate.paths < 1000 {
            return Err(Error::Config("simulate.paths must be at least 1000".into()));
        }
        Ok(())
    }

    pub fn day_from(&self) -> Result<Option<Day>> {
        parse_day(self.from.as_deref(), "from")
    }

    pub fn day_to(&self) -> Result<Option<Day>> {
        parse_day(self.to.as_deref(), "to")
    }

    pub fn in_range(&self, day: Day) -> bool {
        let from = self.day_from().ok().flatten();
        let to = self.day_to().ok().flatten();
        from.is_none_or(|f| day >= f) && to.is_none_or(|t| day <= t)
    }

    /// Hash of everything that can influence artifact content.
    pub fn config_hash(&self) -> String {
        let mut canonical = self.clone();
        canonical.jobs = 0;
        canonical.output_dir = PathBuf::new();
        let json = serde_json::to_vec(&canonical).expect("config serializes");
        let digest = Sha256::digest(&json);
        hex_prefix(&digest, 16)
    }
}

fn parse_day(s: Option<&str>, which: &str) -> Result<Option<Day>> {
    match s {
        None => Ok(None),
        Some(text) => Day::parse_iso(text)
            .map(Some)
            .ok_or_else(|| Error::Config(format!("bad {which} date {text:?}, expected YYYY-MM-DD"))),
    }
}

pub(crate) fn hex_prefix(digest: &[u8], bytes: usize) -> String {
    digest.iter().take(bytes).map(|b| format!("{b:02x}")).collect()
}
