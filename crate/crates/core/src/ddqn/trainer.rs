use std::io::Write;
use std::path::Path;

use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::per::PrioritizedBuffer;
use super::replay::{sample_minibatch, ReplayBuffers, Transition};
use super::{compute_targets, select_action, ReplayMode, TrainConfig};
use crate::env::{stream_rng, Density, EnvConfig, Stream, WorldFactory};
use crate::eval::{evaluate_on, EvalSettings, Policy};
use crate::qnet::{copy_to_target, Checkpoint, QNetConfig, RngState, Sample};
use crate::reward::total_reward;
use crate::shield::{check_and_override, LaneContext, ShieldAuditLog};
use crate::sim::Action;
use crate::{Adam, Error, QNetwork, Result};

/// Per-episode training record; the CSV columns follow field order.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpisodeLog {
    pub episode: u64,
    pub reward_per_decision: f64,
    pub epsilon: f64,
    pub shield_triggers: u32,
    /// Ego collisions (0 or 1).
    pub collisions: u32,
    /// Mean minibatch loss; empty while the buffers warm up.
    pub loss: Option<f64>,
    pub steps: u32,
    pub mean_speed: f64,
    /// Episodes cut short by a collision between two traffic cars.
    pub traffic_collisions: u32,
}

/// Greedy shielded evaluation taken during training.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalPoint {
    /// Training episodes completed.
    pub episode: u64,
    pub reward_per_decision: f64,
    pub mean_speed: f64,
    pub collisions: u32,
    pub shield_triggers: u32,
}

pub fn write_training_log<W: Write, R: Serialize>(out: W, rows: &[R]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone)]
enum Replay {
    Dual(ReplayBuffers),
    Per(PrioritizedBuffer),
}

impl Replay {
    fn push(&mut self, t: Transition) {
        match self {
            Replay::Dual(b) => b.push(t),
            Replay::Per(b) => b.push(t),
        }
    }
}

/// Stream of evaluation scenarios, fixed across evaluation points.
fn eval_seed(seed: u64) -> u64 {
    seed ^ 0x5eed_e7a1_0000_0000
}

/// Algorithm state: networks, optimizer, replay and RNG.
pub struct Trainer {
    env: EnvConfig,
    cfg: TrainConfig,
    online: QNetwork,
    target: QNetwork,
    adam: Adam,
    replay: Replay,
    rng: ChaCha8Rng,
    factory: WorldFactory,
    episode: u64,
    log: Vec<EpisodeLog>,
    evals: Vec<EvalPoint>,
    audit: Option<ShieldAuditLog<Box<dyn Write>>>,
    /// Zero learning rate: updates could not move the parameters.
    frozen: bool,
}

impl Trainer {
    /// Fresh He-initialized networks.
    pub fn new(env: EnvConfig, cfg: TrainConfig, qcfg: &QNetConfig) -> Result<Self> {
        let mut init = stream_rng(cfg.seed, Stream::Init, 0);
        let online = QNetwork::he_uniform(&qcfg.sizes(), qcfg.leak, &mut init)?;
        Self::with_params(env, cfg, qcfg, online)
    }

    /// Starts from given parameters with a synced target and fresh optimizer.
    pub fn with_params(env: EnvConfig, cfg: TrainConfig, qcfg: &QNetConfig, online: QNetwork) -> Result<Self> {
        env.validate()?;
        cfg.validate()?;
        let adam = Adam::with_hyper(online.params().len(), qcfg.learning_rate, qcfg.adam_beta1, qcfg.adam_beta2, qcfg.adam_eps);
        let replay = match cfg.replay {
            ReplayMode::DualBuffer => Replay::Dual(ReplayBuffers::new(cfg.safe_capacity, cfg.collision_capacity)),
            ReplayMode::Per => Replay::Per(PrioritizedBuffer::new(
                cfg.safe_capacity + cfg.collision_capacity,
                cfg.per_alpha,
                cfg.per_beta,
                cfg.per_eps,
            )),
        };
        let factory = WorldFactory::new(env.clone(), cfg.seed, Density::new(cfg.traffic_min, cfg.traffic_max)?);
        Ok(Self {
            target: copy_to_target(&online),
            online,
            adam,
            replay,
            rng: stream_rng(cfg.seed, Stream::Agent, 0),
            factory,
            episode: 0,
            log: Vec::new(),
            evals: Vec::new(),
            audit: None,
            frozen: qcfg.learning_rate == 0.0,
            env,
            cfg,
        })
    }

    /// Resumes networks, optimizer, episode counter and agent RNG. Replay
    /// contents are not checkpointed and refill from scratch.
    pub fn resume(env: EnvConfig, cfg: TrainConfig, qcfg: &QNetConfig, ckpt: Checkpoint<f64>) -> Result<Self> {
        let mut t = Self::with_params(env, cfg, qcfg, ckpt.online)?;
        if let Some(target) = ckpt.target {
            t.target = target;
        }
        if let Some(adam) = ckpt.adam {
            t.adam = adam;
        }
        if let Some(rng) = ckpt.rng {
            t.rng = rng.restore();
        }
        t.episode = ckpt.episode;
        Ok(t)
    }

    pub fn set_audit_log(&mut self, out: Box<dyn Write>) -> Result<()> {
        self.audit = Some(ShieldAuditLog::new(out)?);
        Ok(())
    }

    pub fn online(&self) -> &QNetwork {
        &self.online
    }

    pub fn target(&self) -> &QNetwork {
        &self.target
    }

    pub fn config(&self) -> &TrainConfig {
        &self.cfg
    }

    pub fn log(&self) -> &[EpisodeLog] {
        &self.log
    }

    pub fn evals(&self) -> &[EvalPoint] {
        &self.evals
    }

    /// Episodes completed.
    pub fn episode(&self) -> u64 {
        self.episode
    }

    /// Stored transitions as `(safe, collision)`; the prioritized buffer
    /// splits its single store by source.
    pub fn stored(&self) -> (usize, usize) {
        match &self.replay {
            Replay::Dual(b) => (b.safe.len(), b.collision.len()),
            Replay::Per(b) => {
                let col = (0..b.len()).filter(|&i| b.get(i).s_next.is_none()).count();
                (b.len() - col, col)
            }
        }
    }

    pub fn into_online(self) -> QNetwork {
        self.online
    }

    pub fn checkpoint(&self) -> Checkpoint<f64> {
        Checkpoint {
            online: self.online.clone(),
            target: Some(self.target.clone()),
            adam: Some(self.adam.clone()),
            episode: self.episode,
            rng: Some(RngState::capture(&self.rng)),
        }
    }

    /// Runs the remaining episodes up to the configured count.
    pub fn train(&mut self) -> Result<()> {
        while self.episode < self.cfg.episodes {
            self.run_episode()?;
        }
        if let Some(a) = self.audit.as_mut() {
            a.flush()?;
        }
        Ok(())
    }

    /// One training episode, including the periodic target sync and
    /// greedy evaluation that follow it.
    pub fn run_episode(&mut self) -> Result<EpisodeLog> {
        let epsilon = self.cfg.epsilon(self.episode);
        let log = self.play(epsilon)?;
        self.episode += 1;
        if self.episode % self.cfg.target_sync_episodes == 0 {
            self.target = copy_to_target(&self.online);
        }
        if self.cfg.eval_every > 0 && self.episode % self.cfg.eval_every == 0 {
            self.evaluate_now()?;
        }
        self.log.push(log.clone());
        Ok(log)
    }

    fn evaluate_now(&mut self) -> Result<()> {
        let factory = WorldFactory { seed: eval_seed(self.cfg.seed), ..self.factory.clone() };
        let settings = EvalSettings {
            episodes: self.cfg.eval_episodes,
            steps: self.cfg.steps_per_episode,
            shield: true,
        };
        let m = evaluate_on(&Policy::Greedy(&self.online), &factory, &settings)?;
        self.evals.push(EvalPoint {
            episode: self.episode,
            reward_per_decision: m.mean_reward_per_decision,
            mean_speed: m.mean_speed,
            collisions: m.collisions,
            shield_triggers: m.shield_triggers,
        });
        Ok(())
    }

    fn play(&mut self, epsilon: f64) -> Result<EpisodeLog> {
        let mut sim = self.factory.build(self.episode)?;
        let r_col = self.env.reward.r_col;
        let mut log = EpisodeLog {
            episode: self.episode,
            reward_per_decision: 0.0,
            epsilon,
            shield_triggers: 0,
            collisions: 0,
            loss: None,
            steps: 0,
            mean_speed: 0.0,
            traffic_collisions: 0,
        };
        let (mut reward_sum, mut speed_sum, mut loss_sum, mut updates) = (0.0, 0.0, 0.0, 0u32);
        let (mut raw, mut s) = self.env.observe(&sim);

        for step in 0..self.cfg.steps_per_episode {
            let a = select_action(&self.online, &s.0, epsilon, &mut self.rng)?;
            let proposed = Action::from_index(a).expect("network output within action space");
            let executed = if self.cfg.shield {
                let v = check_and_override(&raw, proposed, &LaneContext::of(sim.world.ego()), &self.env.safety);
                if v.overridden {
                    self.replay.push(Transition::collision(s, a, r_col));
                    log.shield_triggers += 1;
                    if let Some(audit) = self.audit.as_mut() {
                        audit.record(self.episode as usize, step, &v)?;
                    }
                }
                v.executed
            } else {
                proposed
            };

            let out = sim.step(executed);
            let (raw_next, s_next) = self.env.observe(&sim);
            let r = total_reward(&raw, &raw_next, executed.index(), out.ego_collided, &self.env.reward);
            if out.ego_collided {
                self.replay.push(Transition::collision(s, executed.index(), r_col));
                log.collisions += 1;
            } else {
                self.replay.push(Transition::safe(s, executed.index(), s_next, r));
                if out.collision.is_some() {
                    log.traffic_collisions += 1;
                }
            }

            if let Some(loss) = self.learn()? {
                if !loss.is_finite() {
                    return Err(Error::NonFiniteLoss { loss, episode: self.episode as usize, step });
                }
                loss_sum += loss;
                updates += 1;
            }

            reward_sum += r;
            speed_sum += sim.world.ego().v_x;
            log.steps += 1;
            if out.collision.is_some() {
                break;
            }
            raw = raw_next;
            s = s_next;
        }

        let n = f64::from(log.steps.max(1));
        log.reward_per_decision = reward_sum / n;
        log.mean_speed = speed_sum / n;
        log.loss = (updates > 0).then(|| loss_sum / f64::from(updates));
        Ok(log)
    }

    /// Minibatch sample, targets and one Adam step. `None` during warm-up.
    fn learn(&mut self) -> Result<Option<f64>> {
        if self.frozen {
            return Ok(None);
        }
        let n = self.cfg.batch_size;
        let gamma = self.cfg.gamma;
        let (out, per_indices) = match &mut self.replay {
            Replay::Dual(bufs) => {
                let Some(batch) = sample_minibatch(bufs, n, self.cfg.collision_fraction, &mut self.rng) else {
                    return Ok(None);
                };
                let y = compute_targets(&batch, &self.online, &self.target, gamma)?;
                let samples: Vec<Sample<'_, f64>> =
                    batch.iter().zip(&y).map(|(t, &y)| Sample { input: &t.s.0, action: t.a, target: y }).collect();
                (self.online.weighted_loss_and_gradient(&samples, None)?, None)
            }
            Replay::Per(buf) => {
                let Some(pb) = buf.sample(n, &mut self.rng) else {
                    return Ok(None);
                };
                let batch: Vec<&Transition> = pb.indices.iter().map(|&i| buf.get(i)).collect();
                let y = compute_targets(&batch, &self.online, &self.target, gamma)?;
                let samples: Vec<Sample<'_, f64>> =
                    batch.iter().zip(&y).map(|(t, &y)| Sample { input: &t.s.0, action: t.a, target: y }).collect();
                (self.online.weighted_loss_and_gradient(&samples, Some(&pb.weights))?, Some(pb.indices))
            }
        };
        if !out.loss.is_finite() {
            return Ok(Some(out.loss));
        }
        if let (Some(idx), Replay::Per(buf)) = (per_indices, &mut self.replay) {
            buf.update(&idx, &out.residuals);
        }
        self.adam.step(self.online.params_mut(), &out.grad)?;
        Ok(Some(out.loss))
    }

    /// Saves a checkpoint atomically enough for a batch job: write then rename.
    pub fn save_checkpoint(&self, path: &Path) -> Result<()> {
        let tmp = path.with_extension("tmp");
        self.checkpoint().save(&tmp)?;
        std::fs::rename(&tmp, path)?;
        Ok(())
    }
}
