//! Episode construction shared by training and evaluation: configuration
//! bundle, seeded RNG streams and the per-episode world factory.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::affordance::{extract, normalize, AffordanceConfig, AffordanceVector};
use crate::reward::RewardConfig;
use crate::shield::SafetyParams;
use crate::sim::{SimConfig, Simulation};
use crate::Result;

/// Everything that defines the driving task.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EnvConfig {
    pub sim: SimConfig,
    pub safety: SafetyParams,
    pub reward: RewardConfig,
    pub affordance: AffordanceConfig,
}

impl EnvConfig {
    pub fn validate(&self) -> Result<()> {
        self.sim.validate()?;
        self.safety.validate()?;
        self.reward.validate()
    }

    /// Raw and normalized affordances of the ego car.
    pub fn observe(&self, sim: &Simulation) -> (AffordanceVector, AffordanceVector) {
        let raw = extract(&sim.world, &self.sim, &self.affordance);
        let norm = normalize(&raw, &self.sim, &self.affordance);
        (raw, norm)
    }
}

/// Independent random streams of one experiment.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    /// Network initialization.
    Init,
    /// Exploration and minibatch sampling.
    Agent,
    /// Traffic count and placement.
    Spawn,
    /// Traffic lane-change decisions.
    Behavior,
}

impl Stream {
    fn tag(self) -> &'static [u8] {
        match self {
            Stream::Init => b"init",
            Stream::Agent => b"agent",
            Stream::Spawn => b"spawn",
            Stream::Behavior => b"behavior",
        }
    }
}

/// RNG for `(seed, stream)`, positioned on ChaCha stream `index` (the
/// episode number for per-episode streams).
pub fn stream_rng(seed: u64, stream: Stream, index: u64) -> ChaCha8Rng {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(stream.tag());
    let key: [u8; 32] = h.finalize().into();
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(index);
    rng
}

/// Number of traffic cars per episode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Density {
    Fixed(usize),
    /// Uniform over the inclusive range, drawn from the spawn stream.
    Range(usize, usize),
}

impl Density {
    pub fn new(min: usize, max: usize) -> Result<Self> {
        if min == 0 || min > max {
            return Err(crate::Error::Config(format!("traffic density range {min}..={max} is empty or starts at 0")));
        }
        Ok(if min == max { Density::Fixed(min) } else { Density::Range(min, max) })
    }

    fn draw<R: Rng + ?Sized>(self, rng: &mut R) -> usize {
        match self {
            Density::Fixed(n) => n,
            Density::Range(lo, hi) => rng.gen_range(lo..=hi),
        }
    }
}

/// Builds episode `k` of an experiment. Spawns depend only on
/// `(seed, k, density)`, so arms that share a seed see the same traffic.
#[derive(Debug, Clone)]
pub struct WorldFactory {
    pub env: EnvConfig,
    pub seed: u64,
    pub density: Density,
}

impl WorldFactory {
    pub fn new(env: EnvConfig, seed: u64, density: Density) -> Self {
        Self { env, seed, density }
    }

    pub fn build(&self, episode: u64) -> Result<Simulation> {
        let mut spawn = stream_rng(self.seed, Stream::Spawn, episode);
        let n = self.density.draw(&mut spawn);
        let behavior = stream_rng(self.seed, Stream::Behavior, episode);
        Simulation::new_episode(&self.env.sim, &self.env.safety, n, &mut spawn, behavior)
    }
}
