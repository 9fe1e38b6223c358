//! Experiment configuration: one JSON file describes a full reproducible
//! run. Unknown fields are hard errors so hyperparameter typos cannot
//! silently fall back to defaults.

use std::path::PathBuf;
#[cfg(test)]
use std::path::Path;

use serde::de::Error as _;
use serde::{Deserialize, Deserializer};

use genlab_core::mlp::{DEFAULT_LEARNING_RATE, DEFAULT_WEIGHT_DECAY, PAPER_SNAPSHOTS};

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub dataset: Source,
    pub mask: Source,
    pub machine: MachineConfig,
    #[serde(default = "default_replicas")]
    pub replicas: usize,
    pub output_dir: PathBuf,
    pub seed: u64,
}

fn default_replicas() -> usize {
    4
}

/// Dataset or mask source: a builtin name or a PGM file.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum Source {
    Builtin(String),
    File(FileSource),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileSource {
    pub pgm: PathBuf,
}

#[derive(Debug, Clone)]
pub enum MachineConfig {
    Fnn(FnnMachine),
    Nusvc(NusvcMachine),
}

// Hand-rolled so the flat `{"kind": ..., ...}` shape still rejects
// unknown fields (serde's internally tagged enums cannot).
impl<'de> Deserialize<'de> for MachineConfig {
    fn deserialize<D>(deserializer: D) -> Result<Self, D::Error>
    where
        D: Deserializer<'de>,
    {
        let mut map = serde_json::Map::deserialize(deserializer)?;
        let kind = map
            .remove("kind")
            .ok_or_else(|| D::Error::custom("machine config needs a \"kind\" field"))?;
        let kind: String = serde_json::from_value(kind)
            .map_err(|e| D::Error::custom(format!("machine kind: {e}")))?;
        let rest = serde_json::Value::Object(map);
        match kind.as_str() {
            "fnn" => serde_json::from_value(rest)
                .map(MachineConfig::Fnn)
                .map_err(|e| D::Error::custom(format!("fnn machine: {e}"))),
            "nusvc" => serde_json::from_value(rest)
                .map(MachineConfig::Nusvc)
                .map_err(|e| D::Error::custom(format!("nusvc machine: {e}"))),
            other => Err(D::Error::custom(format!(
                "unknown machine kind {other:?} (expected \"fnn\" or \"nusvc\")"
            ))),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FnnMachine {
    #[serde(default = "default_layer_sizes")]
    pub layer_sizes: Vec<usize>,
    #[serde(default = "default_learning_rate")]
    pub learning_rate: f64,
    #[serde(default = "default_weight_decay")]
    pub weight_decay: f64,
    pub iterations: u64,
    #[serde(default)]
    pub snapshots: SnapshotSchedule,
    #[serde(default)]
    pub init: InitSpec,
}

/// Weight initialization: the fan-in-scaled default, or a flat uniform
/// bound (more robust on strongly imbalanced targets; see the library
/// docs).
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum InitSpec {
    Named(String),
    Uniform(UniformInit),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UniformInit {
    pub uniform: f64,
}

impl Default for InitSpec {
    fn default() -> Self {
        InitSpec::Named("fan_in".into())
    }
}

impl InitSpec {
    pub fn validate(&self) -> Result<(), String> {
        match self {
            InitSpec::Named(name) if name == "fan_in" => Ok(()),
            InitSpec::Named(other) => Err(format!(
                "unknown init {other:?} (expected \"fan_in\" or {{\"uniform\": bound}})"
            )),
            InitSpec::Uniform(u) if u.uniform > 0.0 && u.uniform.is_finite() => Ok(()),
            InitSpec::Uniform(u) => Err(format!("init bound must be positive, got {}", u.uniform)),
        }
    }
}

fn default_layer_sizes() -> Vec<usize> {
    vec![2, 16, 16, 1]
}

fn default_learning_rate() -> f64 {
    DEFAULT_LEARNING_RATE
}

fn default_weight_decay() -> f64 {
    DEFAULT_WEIGHT_DECAY
}

/// Either a named preset or an explicit ascending iteration list.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum SnapshotSchedule {
    Preset(String),
    Explicit(Vec<u64>),
}

impl Default for SnapshotSchedule {
    fn default() -> Self {
        SnapshotSchedule::Preset("paper".into())
    }
}

impl SnapshotSchedule {
    pub fn resolve(&self) -> Result<Vec<u64>, String> {
        match self {
            SnapshotSchedule::Preset(name) if name == "paper" => Ok(PAPER_SNAPSHOTS.to_vec()),
            SnapshotSchedule::Preset(other) => Err(format!(
                "unknown snapshot preset {other:?} (only \"paper\" exists)"
            )),
            SnapshotSchedule::Explicit(list) => Ok(list.clone()),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NusvcMachine {
    #[serde(default = "default_nu")]
    pub nu: f64,
    pub gamma: f64,
    #[serde(default = "default_cost")]
    pub cost: f64,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default = "default_max_iterations")]
    pub max_iterations: u64,
    /// Binarization threshold on the [0, 1] lightness scale.
    #[serde(default = "default_threshold")]
    pub threshold: f64,
}

fn default_nu() -> f64 {
    0.2
}

fn default_cost() -> f64 {
    1.0
}

fn default_epsilon() -> f64 {
    0.001
}

fn default_max_iterations() -> u64 {
    10_000_000
}

fn default_threshold() -> f64 {
    0.5
}

impl ExperimentConfig {
    pub fn from_json(json: &str) -> Result<Self, String> {
        let config: ExperimentConfig =
            serde_json::from_str(json).map_err(|e| format!("config: {e}"))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.replicas == 0 {
            return Err("replicas must be >= 1".into());
        }
        match &self.machine {
            MachineConfig::Fnn(fnn) => {
                if fnn.layer_sizes.first() != Some(&2) || fnn.layer_sizes.last() != Some(&1) {
                    return Err(format!(
                        "fnn layer_sizes must map 2 inputs to 1 output, got {:?}",
                        fnn.layer_sizes
                    ));
                }
                fnn.init.validate()?;
                let snapshots = fnn.snapshots.resolve()?;
                if snapshots.is_empty() {
                    return Err("fnn snapshots must name at least one iteration".into());
                }
                for &s in &snapshots {
                    if s < 1 || s > fnn.iterations {
                        return Err(format!(
                            "snapshot iteration {s} outside [1, {}]; override \"snapshots\" \
                             for short runs",
                            fnn.iterations
                        ));
                    }
                }
            }
            MachineConfig::Nusvc(svc) => {
                if !(svc.threshold >= 0.0 && svc.threshold <= 1.0) {
                    return Err(format!(
                        "binarization threshold must be in [0, 1], got {}",
                        svc.threshold
                    ));
                }
            }
        }
        Ok(())
    }
}
