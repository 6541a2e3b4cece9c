use serde::{Deserialize, Serialize};

use super::trainer::{EpisodeLog, Trainer};
use super::{ReplayMode, TrainConfig};
use crate::env::EnvConfig;
use crate::qnet::QNetConfig;
use crate::{QNetwork, Result};

/// Post-deployment retraining from shield violations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdaptConfig {
    pub episodes: u64,
    /// 0 freezes the policy (the no-adaptation control).
    pub learning_rate: f64,
    /// Scenario seed; use the same value for both arms of a comparison.
    pub seed: u64,
}

impl Default for AdaptConfig {
    fn default() -> Self {
        Self { episodes: 2000, learning_rate: 1e-5, seed: 1 }
    }
}

#[derive(Debug, Clone)]
pub struct AdaptOutcome {
    pub params: QNetwork,
    pub log: Vec<EpisodeLog>,
}

impl AdaptOutcome {
    /// Shield triggers per episode.
    pub fn triggers(&self) -> Vec<f64> {
        self.log.iter().map(|l| f64::from(l.shield_triggers)).collect()
    }
}

/// Runs the greedy policy with the shield on. Every override is stored as a
/// collision record and minibatch updates continue at `learning_rate`.
/// Buffer sizes, batch composition, γ and target sync come from `base`.
pub fn adapt(params: &QNetwork, base: &TrainConfig, acfg: &AdaptConfig, env: &EnvConfig, qcfg: &QNetConfig) -> Result<AdaptOutcome> {
    let cfg = TrainConfig {
        episodes: acfg.episodes,
        epsilon_start: 0.0,
        epsilon_end: 0.0,
        epsilon_anneal_episodes: 0,
        shield: true,
        replay: ReplayMode::DualBuffer,
        eval_every: 0,
        seed: acfg.seed,
        ..base.clone()
    };
    let qcfg = QNetConfig { learning_rate: acfg.learning_rate, ..qcfg.clone() };
    let mut t = Trainer::with_params(env.clone(), cfg, &qcfg, params.clone())?;
    t.train()?;
    let log = t.log().to_vec();
    Ok(AdaptOutcome { params: t.into_online(), log })
}
