//! The experiment configuration file.
//!
//! Every field is required: the outcome model and the complexity oracle
//! are modelling assumptions and a run should say which ones it used.
//! Files carry a `version`; older versions are migrated on load.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::active::ActiveLearnConfig;
use crate::asp::TrainConfig;
use crate::sim::{DatasetConfig, PolicyKind, SimConfig, Task};
use crate::{Error, Result};

pub const CONFIG_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvaluationConfig {
    pub tasks: Vec<String>,
    pub policies: Vec<PolicyKind>,
    pub episodes: usize,
}

impl Default for EvaluationConfig {
    fn default() -> Self {
        Self {
            tasks: ["consecutive:5", "consecutive:10", "consecutive:15", "randomized:18-20", "randomized:20-22", "randomized:22-25"]
                .map(String::from)
                .to_vec(),
            policies: PolicyKind::ALL.to_vec(),
            episodes: 20,
        }
    }
}

impl EvaluationConfig {
    pub fn parsed_tasks(&self) -> Result<Vec<Task>> {
        self.tasks
            .iter()
            .map(|t| t.parse().map_err(|e: Error| Error::Config(e.to_string())))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub version: u32,
    /// Every stage seed is derived from this one.
    pub seed: u64,
    /// Relative paths are taken from the config file's directory.
    pub output_dir: PathBuf,
    pub sim: SimConfig,
    pub dataset: DatasetConfig,
    /// Size of the frozen set the logical ratios are measured on.
    pub holdout_samples: usize,
    /// Initial-set actions lie within this many levels of the required one.
    pub init_band: u8,
    pub train: TrainConfig,
    pub active: ActiveLearnConfig,
    pub evaluation: EvaluationConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            version: CONFIG_VERSION,
            seed: 1,
            output_dir: PathBuf::from("run"),
            sim: SimConfig::default(),
            dataset: DatasetConfig::default(),
            holdout_samples: 700,
            init_band: 1,
            train: TrainConfig::default(),
            active: ActiveLearnConfig::default(),
            evaluation: EvaluationConfig::default(),
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        if self.version != CONFIG_VERSION {
            return Err(Error::Config(format!("config version {} is not {CONFIG_VERSION}", self.version)));
        }
        self.sim.validate()?;
        self.train.validate()?;
        self.active.validate()?;
        if self.dataset.n_samples == 0 || self.evaluation.episodes == 0 {
            return Err(Error::Config("dataset.n_samples and evaluation.episodes must be > 0".into()));
        }
        if self.evaluation.tasks.is_empty() || self.evaluation.policies.is_empty() {
            return Err(Error::Config("evaluation needs at least one task and one policy".into()));
        }
        self.evaluation.parsed_tasks()?;
        Ok(())
    }

    /// Reads, migrates and validates a config file; `output_dir` comes
    /// back resolved against the file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_json(&text)?;
        if cfg.output_dir.is_relative() {
            let base = path.parent().unwrap_or(Path::new(""));
            cfg.output_dir = base.join(&cfg.output_dir);
        }
        Ok(cfg)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let value: serde_json::Value =
            serde_json::from_str(text).map_err(|e| Error::Config(format!("config is not JSON: {e}")))?;
        let value = migrate(value)?;
        let cfg: Self = serde_json::from_value(value).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// SHA-256 of the config with object keys sorted, so it does not
    /// depend on key order in the file. `output_dir` is left out.
    pub fn hash(&self) -> String {
        let mut v = serde_json::to_value(self).expect("config serialises");
        if let Some(m) = v.as_object_mut() {
            m.remove("output_dir");
        }
        // serde_json's map is ordered by key
        hex(&Sha256::digest(v.to_string().as_bytes()))
    }
}

/// Brings an older config document up to [`CONFIG_VERSION`].
pub fn migrate(value: serde_json::Value) -> Result<serde_json::Value> {
    let version = value
        .get("version")
        .and_then(|v| v.as_u64())
        .ok_or_else(|| Error::Config("config has no integer \"version\"".into()))?;
    match version {
        v if v == CONFIG_VERSION as u64 => Ok(value),
        v => Err(Error::Config(format!("no migration from config version {v}"))),
    }
}

pub fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_round_trips_and_validates() {
        let cfg = PipelineConfig::default();
        let text = serde_json::to_string_pretty(&cfg).unwrap();
        assert_eq!(PipelineConfig::from_json(&text).unwrap(), cfg);
    }

    #[test]
    fn unknown_and_missing_keys_are_rejected() {
        let mut v = serde_json::to_value(PipelineConfig::default()).unwrap();
        v["extra"] = serde_json::json!(1);
        assert!(matches!(PipelineConfig::from_json(&v.to_string()), Err(Error::Config(_))));
        let mut v = serde_json::to_value(PipelineConfig::default()).unwrap();
        v["sim"]["outcome"].as_object_mut().unwrap().remove("offsets");
        assert!(matches!(PipelineConfig::from_json(&v.to_string()), Err(Error::Config(_))));
        let mut v = serde_json::to_value(PipelineConfig::default()).unwrap();
        v["version"] = serde_json::json!(0);
        assert!(PipelineConfig::from_json(&v.to_string()).is_err());
    }

    #[test]
    fn hash_ignores_key_order() {
        let cfg = PipelineConfig::default();
        let v = serde_json::to_value(&cfg).unwrap();
        let mut reversed = serde_json::Map::new();
        for (k, x) in v.as_object().unwrap().iter().rev() {
            reversed.insert(k.clone(), x.clone());
        }
        let text = serde_json::Value::Object(reversed).to_string();
        assert_eq!(PipelineConfig::from_json(&text).unwrap().hash(), cfg.hash());
        let other = PipelineConfig { seed: 2, ..cfg.clone() };
        assert_ne!(other.hash(), cfg.hash());
    }
}
