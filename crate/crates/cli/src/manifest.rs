//! Run manifests: one JSON file per command run capturing the resolved
//! config, seed, produced artifacts, and warnings. A manifest is enough
//! to re-execute the command; re-running reproduces every listed
//! artifact byte-for-byte (the manifest itself carries wall time, so it
//! is the one file exempt from that comparison).

use crate::error::{CliError, Result};
use crate::io;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunManifest {
    pub tool_version: String,
    /// Subcommand name as typed on the command line.
    pub command: String,
    pub seed: u64,
    /// Fully resolved config (defaults filled in), as consumed.
    pub config: serde_json::Value,
    /// Input files the command read, relative to the invocation if given
    /// that way.
    pub inputs: Vec<String>,
    /// Output files, relative to the output directory.
    pub artifacts: Vec<String>,
    pub warnings: Vec<String>,
    pub wall_time_s: f64,
}

impl RunManifest {
    pub fn new(command: &str, seed: u64, config: serde_json::Value) -> Self {
        Self {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            seed,
            config,
            inputs: Vec::new(),
            artifacts: Vec::new(),
            warnings: Vec::new(),
            wall_time_s: 0.0,
        }
    }

    pub fn with_inputs(mut self, inputs: &[&Path]) -> Self {
        self.inputs = inputs.iter().map(|p| p.display().to_string()).collect();
        self
    }

    pub fn record_artifact(&mut self, name: &str) {
        self.artifacts.push(name.to_string());
    }

    pub fn write(&self, out_dir: &Path) -> Result<PathBuf> {
        let path = out_dir.join(MANIFEST_FILE);
        io::write_json(&path, self)?;
        Ok(path)
    }

    pub fn read(path: &Path) -> Result<Self> {
        io::read_json(path)
    }

    /// Artifact paths resolved against the manifest's directory.
    pub fn artifact_paths(&self, manifest_path: &Path) -> Result<Vec<PathBuf>> {
        let dir = manifest_path.parent().ok_or_else(|| {
            CliError::Validation(format!("{}: no parent directory", manifest_path.display()))
        })?;
        Ok(self.artifacts.iter().map(|a| dir.join(a)).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn manifest_round_trips_losslessly() {
        let dir = tempfile::tempdir().unwrap();
        let mut manifest =
            RunManifest::new("clean", 7, serde_json::json!({ "mu": 0.5, "epochs": 3 }));
        manifest.record_artifact("posteriors.csv");
        manifest.warnings.push("trials 3 below the identifiability bound 5".into());
        manifest.wall_time_s = 1.25;
        let path = manifest.write(dir.path()).unwrap();
        let read = RunManifest::read(&path).unwrap();
        assert_eq!(serde_json::to_string(&read).unwrap(), serde_json::to_string(&manifest).unwrap());
        let artifacts = read.artifact_paths(&path).unwrap();
        assert_eq!(artifacts, vec![dir.path().join("posteriors.csv")]);
    }
}
