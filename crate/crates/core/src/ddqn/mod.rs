//! Double DQN with a safety shield in the loop: ε-greedy selection, shield
//! interception, segregated replay, double-DQN targets, and the continuous
//! adaptation mode.

mod adapt;
mod per;
mod replay;
mod trainer;

pub use adapt::{adapt, AdaptConfig, AdaptOutcome};
pub use per::{PrioritizedBatch, PrioritizedBuffer};
pub use replay::{collision_share, sample_minibatch, Fifo, ReplayBuffers, Source, Transition};
pub use trainer::{write_training_log, EpisodeLog, EvalPoint, Trainer};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::qnet::argmax;
use crate::sim::Action;
use crate::{Error, QNetwork, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReplayMode {
    /// Separate safe and collision buffers.
    DualBuffer,
    /// One prioritized buffer.
    Per,
}

impl std::str::FromStr for ReplayMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dual_buffer" | "dual" => Ok(ReplayMode::DualBuffer),
            "per" => Ok(ReplayMode::Per),
            _ => Err(Error::Config(format!("unknown replay mode {s:?} (expected dual_buffer or per)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub gamma: f64,
    pub episodes: u64,
    /// Decisions per episode before it is cut off.
    pub steps_per_episode: usize,
    pub epsilon_start: f64,
    pub epsilon_end: f64,
    pub epsilon_anneal_episodes: u64,
    /// Target network sync period (episodes).
    pub target_sync_episodes: u64,
    pub batch_size: usize,
    /// Share of each minibatch drawn from the collision buffer.
    pub collision_fraction: f64,
    pub safe_capacity: usize,
    pub collision_capacity: usize,
    pub seed: u64,
    pub shield: bool,
    pub replay: ReplayMode,
    pub traffic_min: usize,
    pub traffic_max: usize,
    /// Greedy evaluation period (episodes); 0 disables it.
    pub eval_every: u64,
    pub eval_episodes: u64,
    pub per_alpha: f64,
    pub per_beta: f64,
    pub per_eps: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            gamma: 0.9,
            episodes: 10_000,
            steps_per_episode: 200,
            epsilon_start: 1.0,
            epsilon_end: 0.2,
            epsilon_anneal_episodes: 7_000,
            target_sync_episodes: 100,
            batch_size: 32,
            collision_fraction: 0.25,
            safe_capacity: 100_000,
            collision_capacity: 10_000,
            seed: 0,
            shield: true,
            replay: ReplayMode::DualBuffer,
            traffic_min: 10,
            traffic_max: 10,
            eval_every: 100,
            eval_episodes: 10,
            per_alpha: 0.6,
            per_beta: 0.4,
            per_eps: 1e-3,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return bad("gamma must be in (0, 1]");
        }
        let unit = |x: f64| (0.0..=1.0).contains(&x);
        if !unit(self.epsilon_start) || !unit(self.epsilon_end) {
            return bad("epsilon must be in [0, 1]");
        }
        if !unit(self.collision_fraction) {
            return bad("collision_fraction must be in [0, 1]");
        }
        if self.steps_per_episode == 0 || self.batch_size == 0 {
            return bad("steps_per_episode and batch_size must be positive");
        }
        if self.target_sync_episodes == 0 {
            return bad("target_sync_episodes must be positive");
        }
        if self.safe_capacity < self.batch_size {
            return bad("safe_capacity must hold at least one minibatch");
        }
        if !(self.per_alpha >= 0.0 && unit(self.per_beta) && self.per_eps > 0.0) {
            return bad("per_alpha >= 0, per_beta in [0, 1] and per_eps > 0 required");
        }
        crate::env::Density::new(self.traffic_min, self.traffic_max)?;
        Ok(())
    }

    /// Linear per-episode annealing, then constant.
    pub fn epsilon(&self, episode: u64) -> f64 {
        if self.epsilon_anneal_episodes == 0 || episode >= self.epsilon_anneal_episodes {
            return self.epsilon_end;
        }
        let t = episode as f64 / self.epsilon_anneal_episodes as f64;
        self.epsilon_start + (self.epsilon_end - self.epsilon_start) * t
    }
}

/// ε-greedy choice. Always consumes one uniform draw, plus one more when
/// exploring, so the stream position does not depend on the network.
pub fn select_action<R: Rng + ?Sized>(q: &QNetwork, s: &[f64], epsilon: f64, rng: &mut R) -> Result<usize> {
    if rng.gen::<f64>() < epsilon {
        Ok(rng.gen_range(0..Action::COUNT))
    } else {
        q.argmax(s)
    }
}

/// Regression targets: `r` for collision records, otherwise
/// `r + γ·Q̂(s', argmax_a Q(s', a))` with the online net choosing and the
/// target net evaluating.
pub fn compute_targets(batch: &[&Transition], online: &QNetwork, target: &QNetwork, gamma: f64) -> Result<Vec<f64>> {
    batch
        .iter()
        .map(|t| match &t.s_next {
            None => Ok(t.r),
            Some(next) => {
                let a_star = argmax(&online.forward(&next.0)?);
                Ok(t.r + gamma * target.forward(&next.0)?[a_star])
            }
        })
        .collect()
}
