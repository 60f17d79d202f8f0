//! Artifact manifests.
//!
//! Every stage writes `manifest-<stage>.json` next to its artifacts with
//! the config hash, the seed, and input digests. Downstream stages refuse
//! to consume artifacts whose config hash differs from the current run.
//! Manifests carry no timestamps so repeated runs are byte-identical.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::pipeline::config::hex_prefix;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub stage: String,
    pub config_hash: String,
    pub seed: u64,
    /// Input path -> content digest.
    pub inputs: BTreeMap<String, String>,
    /// Artifact file names produced by the stage.
    pub outputs: Vec<String>,
}

impl Manifest {
    pub fn new(stage: &str, config_hash: &str, seed: u64) -> Self {
        Manifest {
            stage: stage.to_string(),
            config_hash: config_hash.to_string(),
            seed,
            inputs: BTreeMap::new(),
            outputs: Vec::new(),
        }
    }

    pub fn record_input(&mut self, path: &Path) -> Result<()> {
        let bytes = std::fs::read(path)?;
        let digest = Sha256::digest(&bytes);
        self.inputs.insert(path.display().to_string(), hex_prefix(&digest, 16));
        Ok(())
    }

    /// Record an upstream artifact by its name relative to the output
    /// directory, so manifests stay identical across output locations.
    pub fn record_artifact_input(&mut self, out_dir: &Path, name: &str) -> Result<()> {
        let bytes = std::fs::read(out_dir.join(name))?;
        let digest = Sha256::digest(&bytes);
        self.inputs.insert(name.to_string(), hex_prefix(&digest, 16));
        Ok(())
    }

    pub fn record_output(&mut self, name: &str) {
        self.outputs.push(name.to_string());
    }

    pub fn write(&self, out_dir: &Path) -> Result<()> {
        let path = out_dir.join(format!("manifest-{}.json", self.stage));
        super::atomic_write(&path, (serde_json::to_string_pretty(self)? + "\n").as_bytes())
    }
}

/// Load an upstream manifest and check it against the current config hash.
///
/// Also re-hashes the inputs the upstream stage recorded: artifacts built
/// from files that have since changed are as stale as artifacts built under
/// another config.
pub fn require_upstream(out_dir: &Path, stage: &str, expected_hash: &str) -> Result<Manifest> {
    let path = out_dir.join(format!("manifest-{stage}.json"));
    let text = std::fs::read_to_string(&path)
        .map_err(|_| Error::MissingArtifact(format!("{stage} ({})", path.display())))?;
    let manifest: Manifest = serde_json::from_str(&text)?;
    if manifest.config_hash != expected_hash {
        return Err(Error::StaleArtifact {
            artifact: path.display().to_string(),
            found: manifest.config_hash,
            expected: expected_hash.to_string(),
        });
    }
    for (input, recorded) in &manifest.inputs {
        // Artifact inputs are recorded relative to the output directory;
        // external inputs carry the path from the config.
        let as_artifact = out_dir.join(input);
        let resolved = if as_artifact.exists() { as_artifact } else { Path::new(input).to_path_buf() };
        let bytes = std::fs::read(&resolved)
            .map_err(|_| Error::MissingArtifact(format!("{input} (recorded by {stage})")))?;
        let current = hex_prefix(&Sha256::digest(&bytes), 16);
        if current != *recorded {
            return Err(Error::StaleArtifact {
                artifact: format!("{} (input {input} changed)", path.display()),
                found: current,
                expected: recorded.clone(),
            });
        }
    }
    Ok(manifest)
}
