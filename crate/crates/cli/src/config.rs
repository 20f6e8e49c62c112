//! Run configuration: one nested struct, read from JSON with flat dotted keys.

use std::path::Path;

use gait_deid::baseline_pgd::PgdConfig;
use gait_deid::models::ModelConfig;
use gait_deid::protector::ProtectionConfig;
use gait_deid::silhouette::{Dims, WalkerBounds};
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::CliError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorpusConfig {
    pub identities: usize,
    pub sequences_per_identity: usize,
    pub seed: u64,
    pub dims: Dims,
    pub bounds: WalkerBounds,
}

impl Default for CorpusConfig {
    fn default() -> Self {
        Self {
            identities: 10,
            sequences_per_identity: 6,
            seed: 1,
            dims: Dims::DESK,
            bounds: WalkerBounds::default(),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    pub rebinarize: bool,
    pub whitebox: bool,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub corpus: CorpusConfig,
    pub models: ModelConfig,
    pub protection: ProtectionConfig,
    pub pgd: PgdConfig,
    pub eval: EvalConfig,
}

/// Flattens nested objects to dotted keys; arrays stay leaves.
fn flatten(prefix: &str, v: &Value, out: &mut Vec<(String, Value)>) {
    match v {
        Value::Object(map) => {
            for (k, child) in map {
                let key = if prefix.is_empty() {
                    k.clone()
                } else {
                    format!("{prefix}.{k}")
                };
                flatten(&key, child, out);
            }
        }
        leaf => out.push((prefix.to_string(), leaf.clone())),
    }
}

impl RunConfig {
    /// Applies dotted-key overrides on top of `self`. Keys that do not name
    /// an existing field are rejected.
    pub fn apply(&self, overrides: &[(String, Value)]) -> Result<Self, CliError> {
        let mut tree = serde_json::to_value(self).expect("config serializes");
        for (key, value) in overrides {
            let mut node = &mut tree;
            for part in key.split('.') {
                node = node
                    .as_object_mut()
                    .and_then(|m: &mut Map<String, Value>| m.get_mut(part))
                    .ok_or_else(|| CliError::Usage(format!("unknown config key `{key}`")))?;
            }
            if node.is_object() {
                return Err(CliError::Usage(format!(
                    "config key `{key}` names a section, not a field"
                )));
            }
            *node = value.clone();
        }
        serde_json::from_value(tree).map_err(|e| CliError::Usage(format!("invalid config: {e}")))
    }

    /// Defaults, then the optional file, then `key=value` overrides.
    pub fn load(path: Option<&Path>, sets: &[String]) -> Result<Self, CliError> {
        let mut overrides = Vec::new();
        if let Some(path) = path {
            let text =
                std::fs::read_to_string(path).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
            let v: Value =
                serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
            if !v.is_object() {
                return Err(CliError::Usage(format!("{}: expected a JSON object", path.display())));
            }
            flatten("", &v, &mut overrides);
        }
        for s in sets {
            let (k, raw) = s
                .split_once('=')
                .ok_or_else(|| CliError::Usage(format!("--set expects key=value, got `{s}`")))?;
            // Bare words such as `vae-only` are taken as strings.
            let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
            overrides.push((k.to_string(), value));
        }
        Self::default().apply(&overrides)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let check = |r: gait_deid::Result<()>| r.map_err(|e| CliError::Usage(format!("invalid config: {e}")));
        check(self.models.validate())?;
        check(self.protection.validate())?;
        check(self.pgd.validate())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn dotted_and_nested_keys_agree() {
        let dotted = RunConfig::default()
            .apply(&[("protection.iterations".into(), json!(7))])
            .unwrap();
        let mut nested = Vec::new();
        flatten("", &json!({"protection": {"iterations": 7}}), &mut nested);
        assert_eq!(dotted, RunConfig::default().apply(&nested).unwrap());
        assert_eq!(dotted.protection.iterations, 7);
    }

    #[test]
    fn unknown_and_section_keys_are_rejected() {
        let cfg = RunConfig::default();
        assert!(cfg.apply(&[("protection.iters".into(), json!(1))]).is_err());
        assert!(cfg.apply(&[("protection".into(), json!(1))]).is_err());
        assert!(cfg.apply(&[("protection.iterations".into(), json!("many"))]).is_err());
    }

    #[test]
    fn every_default_leaf_roundtrips() {
        let mut leaves = Vec::new();
        flatten("", &serde_json::to_value(RunConfig::default()).unwrap(), &mut leaves);
        assert_eq!(RunConfig::default().apply(&leaves).unwrap(), RunConfig::default());
    }
}
