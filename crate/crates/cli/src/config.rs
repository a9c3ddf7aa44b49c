//! The versioned tool configuration file.

use std::collections::BTreeMap;
use std::path::Path;

use anyhow::Context;
use ddtrl::analysis::AnalysisConfig;
use ddtrl::train::TrainConfig;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::UsageError;

/// The checked-in defaults, compiled into the binary.
pub const DEFAULT_CONFIG: &str = include_str!("../../../configs/default.json");
pub const CONFIG_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CartDefaults {
    pub max_depth: usize,
    pub samples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToolConfig {
    pub version: u32,
    /// Base training settings shared by every environment.
    pub train: Value,
    /// Per-environment fields merged over `train`.
    #[serde(default)]
    pub env_overrides: BTreeMap<String, Value>,
    pub analysis: AnalysisConfig,
    pub cart: CartDefaults,
    pub eval_episodes: usize,
    pub sweep_sizes: BTreeMap<String, Vec<usize>>,
}

impl ToolConfig {
    pub fn load(path: Option<&Path>) -> anyhow::Result<Self> {
        let text = match path {
            Some(p) => std::fs::read_to_string(p).with_context(|| format!("reading config {}", p.display()))?,
            None => DEFAULT_CONFIG.to_string(),
        };
        let cfg: Self = serde_json::from_str(&text).map_err(|e| UsageError(format!("config file: {e}")))?;
        if cfg.version != CONFIG_VERSION {
            return Err(UsageError(format!(
                "config version {} is not supported (expected {CONFIG_VERSION})",
                cfg.version
            ))
            .into());
        }
        Ok(cfg)
    }

    /// Training settings for `env`: the base block with that environment's
    /// overrides applied field by field.
    pub fn train_config(&self, env: &str) -> anyhow::Result<TrainConfig> {
        let mut merged = self.train.clone();
        if let (Some(base), Some(Value::Object(over))) = (merged.as_object_mut(), self.env_overrides.get(env)) {
            for (k, v) in over {
                base.insert(k.clone(), v.clone());
            }
        }
        let cfg: TrainConfig =
            serde_json::from_value(merged).map_err(|e| UsageError(format!("train settings for {env}: {e}")))?;
        Ok(cfg)
    }
}
