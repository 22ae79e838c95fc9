//! The composite run configuration: one TOML file with a section per module.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::net::NetConfig;
use crate::ppo::PpoConfig;
use crate::sim::ScenarioConfig;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSettings {
    pub suite: String,
    pub n_episodes: usize,
    pub seed_base: u64,
}

impl Default for EvalSettings {
    fn default() -> Self {
        EvalSettings {
            suite: "fov-360".into(),
            n_episodes: 500,
            seed_base: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSettings {
    pub seed: u64,
    /// Updates between checkpoints; the final update is always saved.
    pub checkpoint_every: u64,
}

impl Default for TrainSettings {
    fn default() -> Self {
        TrainSettings {
            seed: 0,
            checkpoint_every: 50,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub scenario: ScenarioConfig,
    pub network: NetConfig,
    pub ppo: PpoConfig,
    pub eval: EvalSettings,
    pub train: TrainSettings,
}

fn toml_error(e: toml::de::Error) -> Error {
    Error::config(
        "<config>",
        e.message().to_string()
            + &e.span()
                .map(|s| format!(" (at byte {})", s.start))
                .unwrap_or_default(),
    )
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        self.scenario.validate("scenario")?;
        self.network.validate("network")?;
        self.ppo.validate("ppo")?;
        if self.eval.n_episodes == 0 {
            return Err(Error::config("eval.n_episodes", "must be at least 1"));
        }
        Ok(())
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let config: RunConfig = toml::from_str(text).map_err(toml_error)?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config(path.display().to_string(), e.to_string()))?;
        RunConfig::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("run config serializes to TOML")
    }

    /// Applies `section.field=value` overrides. Values are parsed as TOML
    /// literals, falling back to a plain string.
    pub fn with_overrides<S: AsRef<str>>(&self, overrides: &[S]) -> Result<Self> {
        let mut root =
            toml::Value::try_from(self).map_err(|e| Error::config("<config>", e.to_string()))?;
        for raw in overrides {
            let raw = raw.as_ref();
            let (path, value) = raw.split_once('=').ok_or_else(|| {
                Error::config(raw, "override must look like `section.field=value`")
            })?;
            let path = path.trim();
            let value = value.trim();
            let parsed = toml::from_str::<toml::Table>(&format!("v = {value}"))
                .ok()
                .and_then(|mut t| t.remove("v"))
                .unwrap_or_else(|| toml::Value::String(value.to_string()));
            let mut node = &mut root;
            let keys: Vec<&str> = path.split('.').collect();
            for (i, key) in keys.iter().enumerate() {
                let table = node.as_table_mut().ok_or_else(|| {
                    Error::config(path, format!("`{}` is not a section", keys[..i].join(".")))
                })?;
                if i + 1 == keys.len() {
                    if !table.contains_key(*key) {
                        return Err(Error::config(path, "no such field"));
                    }
                    table.insert(key.to_string(), parsed.clone());
                    break;
                }
                node = table.get_mut(*key).ok_or_else(|| {
                    Error::config(path, format!("no such section `{}`", keys[..=i].join(".")))
                })?;
            }
        }
        let config: RunConfig = root
            .try_into()
            .map_err(|e: toml::de::Error| Error::config("<override>", e.message()))?;
        config.validate()?;
        Ok(config)
    }
}
