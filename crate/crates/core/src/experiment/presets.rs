//! Experiment configs shipped with the library.

use std::path::Path;

use super::config::ExperimentConfig;
use crate::error::{Error, Result};

const PRESETS: [(&str, &str); 4] = [
    ("synthetic_single", include_str!("../../presets/synthetic_single.toml")),
    ("synthetic_batch", include_str!("../../presets/synthetic_batch.toml")),
    ("weather_izmir_baseline", include_str!("../../presets/weather_izmir_baseline.toml")),
    ("letters_baseline", include_str!("../../presets/letters_baseline.toml")),
];

pub fn preset_names() -> Vec<&'static str> {
    PRESETS.iter().map(|(n, _)| *n).collect()
}

pub fn preset_source(name: &str) -> Result<&'static str> {
    PRESETS
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, text)| *text)
        .ok_or_else(|| Error::Config(format!("unknown preset {name:?}; known: {}", preset_names().join(", "))))
}

/// A preset with dataset paths resolved against `data_dir`.
pub fn preset(name: &str, data_dir: impl AsRef<Path>) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::from_toml(preset_source(name)?)?;
    cfg.resolve_paths(data_dir.as_ref());
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_preset_parses() {
        for name in preset_names() {
            let cfg = preset(name, "data").unwrap();
            assert_eq!(cfg.name, name);
        }
        assert!(preset("nope", "data").unwrap_err().is_config());
    }

    #[test]
    fn synthetic_presets_validate() {
        preset("synthetic_single", ".").unwrap().validate().unwrap();
        preset("synthetic_batch", ".").unwrap().validate().unwrap();
    }
}
