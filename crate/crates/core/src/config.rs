//! Configuration files: a JSON object whose fields override the training
//! defaults, plus the reduced-scale preset used for desk experiments.

use std::path::Path;

use crate::agent::TrainConfig;
use crate::error::{Error, Result};

/// Reads a JSON training configuration; absent fields keep their defaults.
pub fn load_train_config(path: &Path) -> Result<TrainConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_train_config(&text)
}

pub fn parse_train_config(text: &str) -> Result<TrainConfig> {
    let config: TrainConfig = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
    config.validate()?;
    Ok(config)
}

/// Overrides the fields of `base` that appear in the JSON object `text`.
pub fn overlay_train_config(base: &TrainConfig, text: &str) -> Result<TrainConfig> {
    let patch: serde_json::Value = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
    let serde_json::Value::Object(patch) = patch else {
        return Err(Error::Config("configuration must be a JSON object".into()));
    };
    let mut merged = serde_json::to_value(base).map_err(|e| Error::Config(e.to_string()))?;
    let fields = merged.as_object_mut().expect("config serializes to an object");
    for (k, v) in patch {
        if k == "adam" {
            if let (Some(dst), serde_json::Value::Object(src)) = (fields.get_mut("adam").and_then(|a| a.as_object_mut()), &v) {
                dst.extend(src.clone());
                continue;
            }
        }
        fields.insert(k, v);
    }
    let config: TrainConfig = serde_json::from_value(merged).map_err(|e| Error::Config(e.to_string()))?;
    config.validate()?;
    Ok(config)
}

/// Small networks and a higher learning rate so that fixture games train in
/// seconds on one core.
pub fn desk_config() -> TrainConfig {
    let mut c = TrainConfig {
        embed_dim: 16,
        hidden_dim: 32,
        batch_size: 32,
        total_steps: 8_000,
        updates_per_step: 0.5,
        beta: 0.02,
        ..TrainConfig::default()
    };
    c.adam.lr = 1e-3;
    c
}
