use std::path::{Path, PathBuf};

use crowdnav::config::RunConfig;
use crowdnav::{Error, Result};
use serde::{Deserialize, Serialize};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckpointEntry {
    pub update_idx: u64,
    pub path: PathBuf,
}

/// Self-description of a run directory. Paths are relative to the run dir.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub run_id: String,
    pub config: RunConfig,
    pub seed: u64,
    pub checkpoints: Vec<CheckpointEntry>,
    pub metrics: PathBuf,
}

impl RunManifest {
    pub fn new(run_id: &str, config: RunConfig) -> Self {
        RunManifest {
            run_id: run_id.to_string(),
            seed: config.train.seed,
            config,
            checkpoints: Vec::new(),
            metrics: PathBuf::from(crowdnav::ppo::METRICS_FILE),
        }
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let path = dir.join(MANIFEST_FILE);
        let text = std::fs::read_to_string(&path).map_err(|e| {
            Error::InvalidInput(format!("cannot read run manifest {}: {e}", path.display()))
        })?;
        serde_json::from_str(&text).map_err(|e| {
            Error::InvalidInput(format!("malformed run manifest {}: {e}", path.display()))
        })
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        let text =
            serde_json::to_string_pretty(self).map_err(|e| Error::Contract(e.to_string()))?;
        std::fs::write(dir.join(MANIFEST_FILE), text + "\n")?;
        Ok(())
    }

    /// Re-indexes checkpoints present on disk.
    pub fn refresh_checkpoints(&mut self, dir: &Path) -> Result<()> {
        let mut found = Vec::new();
        let ckpt_dir = dir.join("checkpoints");
        if ckpt_dir.is_dir() {
            for entry in std::fs::read_dir(&ckpt_dir)? {
                let name = entry?.file_name().to_string_lossy().into_owned();
                if let Some(idx) = name
                    .strip_prefix("checkpoint_")
                    .and_then(|s| s.strip_suffix(".ckpt"))
                    .and_then(|s| s.parse::<u64>().ok())
                {
                    found.push(CheckpointEntry {
                        update_idx: idx,
                        path: PathBuf::from("checkpoints").join(name),
                    });
                }
            }
        }
        found.sort_by_key(|c| c.update_idx);
        self.checkpoints = found;
        Ok(())
    }

    pub fn latest(&self) -> Option<&CheckpointEntry> {
        self.checkpoints.last()
    }
}
