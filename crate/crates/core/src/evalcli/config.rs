//! Single-file TOML configuration with `key.path=value` overrides. Unknown
//! keys anywhere are rejected.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::synth::SynthConfig;
use crate::data::ManifestLayout;
use crate::metrics::{ExternalCommand, MetricEvaluator, MetricId};
use crate::training::TrainConfig;

#[derive(Error, Debug)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("config: {0}")]
    Parse(String),
    #[error("bad override `{0}`: expected key.path=value")]
    Override(String),
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DataConfig {
    /// Manifest CSV, or the corpus root for the directory layouts.
    pub manifest: Option<PathBuf>,
    pub layout: ManifestLayout,
}

impl Default for DataConfig {
    fn default() -> Self {
        Self {
            manifest: None,
            layout: ManifestLayout::GenericCsv,
        }
    }
}

/// External evaluators; a metric without a command is unavailable unless
/// it is computed natively.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MetricsConfig {
    pub pesq: Option<ExternalCommand>,
    pub csig: Option<ExternalCommand>,
    pub cbak: Option<ExternalCommand>,
    pub covl: Option<ExternalCommand>,
}

impl MetricsConfig {
    pub fn evaluator(&self) -> MetricEvaluator {
        let mut e = MetricEvaluator::native_only();
        for (id, cmd) in [
            (MetricId::Pesq, &self.pesq),
            (MetricId::Csig, &self.csig),
            (MetricId::Cbak, &self.cbak),
            (MetricId::Covl, &self.covl),
        ] {
            if let Some(c) = cmd {
                e = e.with_external(id, c.clone());
            }
        }
        e
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvaluateConfig {
    pub metrics: Vec<MetricId>,
}

impl Default for EvaluateConfig {
    fn default() -> Self {
        Self {
            metrics: vec![MetricId::Stoi],
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AppConfig {
    pub train: TrainConfig,
    pub synth: SynthConfig,
    pub data: DataConfig,
    pub metrics: MetricsConfig,
    pub evaluate: EvaluateConfig,
}

/// Parses the right-hand side of an override as a TOML value, falling back
/// to a bare string.
fn parse_value(text: &str) -> toml::Value {
    match toml::from_str::<toml::Table>(&format!("v = {text}")) {
        Ok(mut t) => t.remove("v").expect("key present"),
        Err(_) => toml::Value::String(text.to_string()),
    }
}

fn apply_override(table: &mut toml::Table, item: &str) -> Result<(), ConfigError> {
    let (key, value) = item.split_once('=').ok_or_else(|| ConfigError::Override(item.into()))?;
    let parts: Vec<&str> = key.trim().split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(ConfigError::Override(item.into()));
    }
    let mut node = table;
    for p in &parts[..parts.len() - 1] {
        let entry = node
            .entry(p.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        node = entry.as_table_mut().ok_or_else(|| ConfigError::Override(item.into()))?;
    }
    node.insert(parts[parts.len() - 1].to_string(), parse_value(value.trim()));
    Ok(())
}

impl AppConfig {
    pub fn from_toml_str(text: &str, overrides: &[String]) -> Result<Self, ConfigError> {
        let mut table: toml::Table = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        for o in overrides {
            apply_override(&mut table, o)?;
        }
        let config: AppConfig = toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| ConfigError::Parse(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    /// Reads `path` (defaults when `None`) and applies `overrides` in order.
    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self, ConfigError> {
        let text = match path {
            Some(p) => fs::read_to_string(p).map_err(|source| ConfigError::Read {
                path: p.to_path_buf(),
                source,
            })?,
            None => String::new(),
        };
        Self::from_toml_str(&text, overrides)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.train.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        self.synth.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        Ok(())
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::training::Mode;

    #[test]
    fn overrides_apply_and_typos_fail() {
        let c = AppConfig::from_toml_str(
            "[train]\nmode = \"mg_plus_minus\"\n",
            &["train.w=0.3".into(), "evaluate.metrics=[\"stoi\", \"pesq\"]".into()],
        )
        .unwrap();
        assert_eq!(c.train.mode, Mode::MgPlusMinus);
        assert_eq!(c.train.w, 0.3);
        assert_eq!(c.evaluate.metrics, vec![MetricId::Stoi, MetricId::Pesq]);
        assert!(AppConfig::from_toml_str("", &["train.hisotry_portion=0.2".into()]).is_err());
        assert!(AppConfig::from_toml_str("[trian]\n", &[]).is_err());
        assert!(AppConfig::from_toml_str("", &["train.w".into()]).is_err());
    }

    #[test]
    fn serialized_config_round_trips() {
        let mut c = AppConfig::default();
        c.metrics.pesq = Some(ExternalCommand::new(["pesq", "{ref}", "{deg}"]));
        c.data.layout = ManifestLayout::Chime3 { channel: Some(3) };
        let back = AppConfig::from_toml_str(&c.to_toml_string(), &[]).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn invalid_values_are_config_errors() {
        let e = AppConfig::from_toml_str("[train]\nmode = \"mg_plus_minus\"\nw = 1.5\n", &[]).unwrap_err();
        assert!(matches!(e, ConfigError::Invalid(_)));
    }
}
