//! Flat `key = value` run configuration (TOML syntax).
//!
//! Every parameter of every section lives at the top level; adaptation keys
//! carry an `adapt_` prefix. Missing keys take their defaults and unknown
//! keys are rejected. [`RunConfig::to_toml_string`] writes the complete
//! resolved configuration, which loads back to an identical run.

use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use toml::{Table, Value};

use crate::affordance::AffordanceConfig;
use crate::ddqn::{AdaptConfig, TrainConfig};
use crate::env::EnvConfig;
use crate::eval::DEFAULT_DENSITIES;
use crate::qnet::QNetConfig;
use crate::reward::RewardConfig;
use crate::shield::SafetyParams;
use crate::sim::SimConfig;
use crate::{Error, Result};

/// Settings of the evaluation studies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyConfig {
    pub sweep_densities: Vec<usize>,
    /// Episodes per policy and density point; also used by `evaluate`.
    pub sweep_episodes: u64,
    /// Scenario seed of evaluations.
    pub sweep_seed: u64,
    /// Traffic count for single-density evaluation.
    pub evaluate_density: usize,
    /// Training runs per arm in comparisons.
    pub runs: usize,
    /// Moving-average window of curves.
    pub curve_window: usize,
}

impl Default for StudyConfig {
    fn default() -> Self {
        Self {
            sweep_densities: DEFAULT_DENSITIES.to_vec(),
            sweep_episodes: 50,
            sweep_seed: 1000,
            evaluate_density: 10,
            runs: 10,
            curve_window: 50,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunConfig {
    pub env: EnvConfig,
    pub qnet: QNetConfig,
    pub train: TrainConfig,
    pub adapt: AdaptConfig,
    pub study: StudyConfig,
    pub out_dir: Option<PathBuf>,
}

const OUT_DIR: &str = "out_dir";

fn section<T: Serialize>(x: &T) -> Table {
    Table::try_from(x).expect("configuration sections serialize to tables")
}

/// Integers are accepted where the default is a float.
fn coerce(default: &Value, v: Value) -> Value {
    match (default, v) {
        (Value::Float(_), Value::Integer(i)) => Value::Float(i as f64),
        (_, v) => v,
    }
}

fn take<T: Serialize + DeserializeOwned>(default: &T, prefix: &str, flat: &mut Table) -> Result<T> {
    let mut table = section(default);
    for (k, d) in table.iter_mut() {
        if let Some(v) = flat.remove(&format!("{prefix}{k}")) {
            *d = coerce(d, v);
        }
    }
    T::deserialize(Value::Table(table)).map_err(|e| Error::Config(e.to_string()))
}

impl RunConfig {
    fn sections(&self) -> Vec<(&'static str, Table)> {
        vec![
            ("", section(&self.env.sim)),
            ("", section(&self.env.safety)),
            ("", section(&self.env.reward)),
            ("", section(&self.env.affordance)),
            ("", section(&self.qnet)),
            ("", section(&self.train)),
            ("adapt_", section(&self.adapt)),
            ("", section(&self.study)),
        ]
    }

    pub fn to_flat(&self) -> Table {
        let mut out = Table::new();
        for (prefix, t) in self.sections() {
            for (k, v) in t {
                out.insert(format!("{prefix}{k}"), v);
            }
        }
        if let Some(d) = &self.out_dir {
            out.insert(OUT_DIR.into(), Value::String(d.display().to_string()));
        }
        out
    }

    pub fn from_flat(mut flat: Table) -> Result<Self> {
        let d = RunConfig::default();
        let out_dir = match flat.remove(OUT_DIR) {
            None => None,
            Some(Value::String(s)) => Some(PathBuf::from(s)),
            Some(v) => return Err(Error::Config(format!("out_dir must be a string, got {v}"))),
        };
        let cfg = RunConfig {
            env: EnvConfig {
                sim: take::<SimConfig>(&d.env.sim, "", &mut flat)?,
                safety: take::<SafetyParams>(&d.env.safety, "", &mut flat)?,
                reward: take::<RewardConfig>(&d.env.reward, "", &mut flat)?,
                affordance: take::<AffordanceConfig>(&d.env.affordance, "", &mut flat)?,
            },
            qnet: take(&d.qnet, "", &mut flat)?,
            train: take(&d.train, "", &mut flat)?,
            adapt: take(&d.adapt, "adapt_", &mut flat)?,
            study: take(&d.study, "", &mut flat)?,
            out_dir,
        };
        if let Some(k) = flat.keys().next() {
            return Err(Error::Config(format!("unknown key {k:?}")));
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.env.validate()?;
        self.train.validate()?;
        if self.qnet.hidden.is_empty() || self.qnet.hidden.contains(&0) {
            return Err(Error::Config("hidden layer sizes must be positive".into()));
        }
        if !(self.qnet.learning_rate >= 0.0 && self.adapt.learning_rate >= 0.0) {
            return Err(Error::Config("learning rates must be non-negative".into()));
        }
        if self.train.traffic_max > self.env.sim.max_traffic {
            return Err(Error::TrafficCount { requested: self.train.traffic_max, max: self.env.sim.max_traffic });
        }
        Ok(())
    }

    pub fn from_toml_str(s: &str) -> Result<Self> {
        Self::from_flat(parse_table(s)?)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(&self.to_flat()).expect("flat tables serialize")
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }
}

pub fn parse_table(s: &str) -> Result<Table> {
    s.parse::<Table>().map_err(|e| Error::Config(e.to_string()))
}

/// Parses `key=value`; values that are not valid TOML are taken as strings.
pub fn parse_assignment(s: &str) -> Result<(String, Value)> {
    let (k, v) = s.split_once('=').ok_or_else(|| Error::Config(format!("expected key=value, got {s:?}")))?;
    let k = k.trim();
    if k.is_empty() {
        return Err(Error::Config(format!("empty key in {s:?}")));
    }
    let v = v.trim();
    let value = parse_table(&format!("x = {v}"))
        .ok()
        .and_then(|mut t| t.remove("x"))
        .unwrap_or_else(|| Value::String(v.to_string()));
    Ok((k.to_string(), value))
}
