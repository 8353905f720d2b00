//! Configuration tree: simulator knobs, provider and workload overlays, and
//! per-experiment settings, loaded from TOML.
//!
//! ```toml
//! [simulator]
//! seed = 7
//!
//! [providers.slow-evict]
//! extends = "aws-like"
//! eviction_period = 600.0
//!
//! [workloads.tiny]
//! extends = "dynamic-html-py"
//! compute_work = 0.5
//!
//! [experiment.perf-cost]
//! memory = [512, 1024]
//! ```

use std::collections::BTreeMap;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;
use toml::{Table, Value};

use crate::experiments::{default_payload_sizes, EvictionConfig};
use crate::model::{ProviderProfile, WorkloadProfile};
use crate::sim::SimOptions;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("unknown key `{0}`")]
    UnknownKey(String),
    #[error("unknown provider profile `{0}`")]
    UnknownProfile(String),
    #[error("unknown workload `{0}`")]
    UnknownWorkload(String),
    #[error("cannot parse configuration: {0}")]
    Parse(String),
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

impl ConfigError {
    /// The offending key, for unknown-key and unknown-name errors.
    pub fn key(&self) -> Option<&str> {
        match self {
            ConfigError::UnknownKey(k)
            | ConfigError::UnknownProfile(k)
            | ConfigError::UnknownWorkload(k) => Some(k),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulatorSection {
    pub seed: u64,
    pub client_offset_us: i64,
    pub drift_rate: f64,
    /// Switch off every stochastic term of the provider.
    pub zero_jitter: bool,
    pub trace: bool,
    pub faults: FaultSection,
}

impl Default for SimulatorSection {
    fn default() -> Self {
        SimulatorSection {
            seed: 0,
            client_offset_us: 0,
            drift_rate: 0.0,
            zero_jitter: false,
            trace: false,
            faults: FaultSection::default(),
        }
    }
}

impl SimulatorSection {
    pub fn options(&self, seed: u64, trace: bool) -> SimOptions {
        SimOptions {
            seed,
            client_offset_us: self.client_offset_us,
            drift_rate: self.drift_rate,
            trace: trace || self.trace,
            link_failure_after: self.faults.link_failure_after,
        }
    }

    /// Applies jitter and fault settings to a provider profile.
    pub fn apply(&self, profile: &ProviderProfile) -> ProviderProfile {
        let mut p = if self.zero_jitter {
            profile.without_jitter()
        } else {
            profile.clone()
        };
        if let Some(rate) = self.faults.failure_rate {
            p.failure_rate = rate;
        }
        p
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FaultSection {
    pub failure_rate: Option<f64>,
    pub link_failure_after: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PerfCostSection {
    /// Empty means the provider's default sweep.
    pub memory: Vec<u32>,
    pub samples_target: usize,
    pub batch_size: usize,
    pub ci_level: f64,
    pub ci_width_target: f64,
    pub max_samples: usize,
    pub burst: bool,
    pub retry_budget: usize,
}

impl Default for PerfCostSection {
    fn default() -> Self {
        PerfCostSection {
            memory: Vec::new(),
            samples_target: 200,
            batch_size: 50,
            ci_level: 0.95,
            ci_width_target: 0.05,
            max_samples: 1000,
            burst: false,
            retry_budget: 100,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InvocOverheadSection {
    pub memory: u32,
    pub payload_sizes: Vec<u64>,
    pub repetitions: usize,
    pub sync_window: usize,
}

impl Default for InvocOverheadSection {
    fn default() -> Self {
        InvocOverheadSection {
            memory: 1024,
            payload_sizes: default_payload_sizes(20),
            repetitions: 5,
            sync_window: 10,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentSection {
    #[serde(rename = "perf-cost")]
    pub perf_cost: PerfCostSection,
    #[serde(rename = "invoc-overhead")]
    pub invoc_overhead: InvocOverheadSection,
    pub eviction: EvictionConfig,
}

/// A resolved configuration tree. Provider and workload maps hold the
/// built-in presets plus every section of the file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Config {
    pub simulator: SimulatorSection,
    pub providers: BTreeMap<String, ProviderProfile>,
    pub workloads: BTreeMap<String, WorkloadProfile>,
    pub experiment: ExperimentSection,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            simulator: SimulatorSection::default(),
            providers: ProviderProfile::PRESET_NAMES
                .iter()
                .map(|n| (n.to_string(), ProviderProfile::preset(n).expect("preset")))
                .collect(),
            workloads: WorkloadProfile::presets()
                .into_iter()
                .map(|w| (w.name.clone(), w))
                .collect(),
            experiment: ExperimentSection::default(),
        }
    }
}

/// Maps a serde error to an unknown-key error under `path` when it is one.
fn decode<T: DeserializeOwned>(path: &str, value: Value) -> Result<T, ConfigError> {
    value.try_into().map_err(|e: toml::de::Error| {
        let msg = e.message().to_string();
        match msg.strip_prefix("unknown field `").and_then(|rest| rest.split('`').next()) {
            Some(field) => ConfigError::UnknownKey(format!("{path}.{field}")),
            None => ConfigError::Parse(format!("{path}: {msg}")),
        }
    })
}

fn as_table(path: &str, value: Value) -> Result<Table, ConfigError> {
    match value {
        Value::Table(t) => Ok(t),
        other => Err(ConfigError::Parse(format!(
            "{path} must be a table, found {}",
            other.type_str()
        ))),
    }
}

/// Recursively overlays `patch` onto `base`; nested tables merge.
fn overlay(base: &mut Table, patch: Table) {
    for (k, v) in patch {
        match (base.get_mut(&k), v) {
            (Some(Value::Table(b)), Value::Table(p)) => overlay(b, p),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

/// Resolves `[section.name]` entries against a map of known bases.
fn resolve<T>(
    section: &str,
    entries: Table,
    known: &mut BTreeMap<String, T>,
    unknown_base: fn(String) -> ConfigError,
    rename: fn(&mut T, &str),
) -> Result<(), ConfigError>
where
    T: Serialize + DeserializeOwned + Clone,
{
    for (name, body) in entries {
        let path = format!("{section}.{name}");
        let mut body = as_table(&path, body)?;
        let base_name = match body.remove("extends") {
            Some(Value::String(s)) => Some(s),
            Some(_) => return Err(ConfigError::Parse(format!("{path}.extends must be a string"))),
            None => None,
        };
        let mut merged = match base_name.as_deref().or(known.contains_key(&name).then_some(name.as_str())) {
            Some(b) => {
                let base = known.get(b).ok_or_else(|| unknown_base(b.to_string()))?;
                as_table(&path, Value::try_from(base.clone()).map_err(|e| ConfigError::Parse(e.to_string()))?)?
            }
            None => Table::new(),
        };
        overlay(&mut merged, body);
        merged.remove("name");
        merged.insert("name".into(), Value::String(name.clone()));
        let mut value: T = decode(&path, Value::Table(merged))?;
        rename(&mut value, &name);
        known.insert(name, value);
    }
    Ok(())
}

impl Config {
    pub fn from_toml(text: &str) -> Result<Config, ConfigError> {
        let root: Table = text.parse().map_err(|e: toml::de::Error| ConfigError::Parse(e.to_string()))?;
        let mut config = Config::default();
        for (key, value) in root {
            match key.as_str() {
                "simulator" => {
                    let mut t = as_table("simulator", value)?;
                    let faults = t.remove("faults");
                    config.simulator = decode("simulator", Value::Table(t))?;
                    if let Some(f) = faults {
                        config.simulator.faults = decode("simulator.faults", f)?;
                    }
                }
                "experiment" => {
                    for (name, body) in as_table("experiment", value)? {
                        let path = format!("experiment.{name}");
                        let e = &mut config.experiment;
                        match name.as_str() {
                            "perf-cost" => e.perf_cost = decode(&path, body)?,
                            "invoc-overhead" => e.invoc_overhead = decode(&path, body)?,
                            "eviction" => e.eviction = decode(&path, body)?,
                            _ => return Err(ConfigError::UnknownKey(path)),
                        }
                    }
                }
                "providers" => {
                    let entries = as_table("providers", value)?;
                    resolve(
                        "providers",
                        entries,
                        &mut config.providers,
                        ConfigError::UnknownProfile,
                        |p: &mut ProviderProfile, n| p.name = n.to_string(),
                    )?;
                }
                "workloads" => {
                    let entries = as_table("workloads", value)?;
                    resolve(
                        "workloads",
                        entries,
                        &mut config.workloads,
                        ConfigError::UnknownWorkload,
                        |w: &mut WorkloadProfile, n| w.name = n.to_string(),
                    )?;
                }
                other => return Err(ConfigError::UnknownKey(other.to_string())),
            }
        }
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        for p in self.providers.values() {
            p.validate().map_err(|e| ConfigError::Invalid(format!("provider {}: {e}", p.name)))?;
        }
        for w in self.workloads.values() {
            w.validate().map_err(|e| ConfigError::Invalid(format!("workload {}: {e}", w.name)))?;
        }
        if !(0.0..=crate::sim::MAX_DRIFT_RATE).contains(&self.simulator.drift_rate) {
            return Err(ConfigError::Invalid(format!(
                "simulator.drift_rate {} outside [0, {}]",
                self.simulator.drift_rate,
                crate::sim::MAX_DRIFT_RATE
            )));
        }
        if let Some(rate) = self.simulator.faults.failure_rate {
            if !(0.0..=1.0).contains(&rate) {
                return Err(ConfigError::Invalid(format!(
                    "simulator.faults.failure_rate {rate} outside [0, 1]"
                )));
            }
        }
        Ok(())
    }

    pub fn provider(&self, name: &str) -> Result<ProviderProfile, ConfigError> {
        self.providers
            .get(name)
            .map(|p| self.simulator.apply(p))
            .ok_or_else(|| ConfigError::UnknownProfile(name.to_string()))
    }

    pub fn workload(&self, name: &str) -> Result<WorkloadProfile, ConfigError> {
        self.workloads
            .get(name)
            .cloned()
            .ok_or_else(|| ConfigError::UnknownWorkload(name.to_string()))
    }
}
