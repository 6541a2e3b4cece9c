//! Evaluation studies: greedy-policy metrics, IDM baselines, the density
//! sweep, learning curves with confidence bounds and adaptation traces.

use std::io::Write;

use serde::Serialize;

use crate::affordance::{AffordanceVector, LaneRole, Side};
use crate::env::{Density, EnvConfig, WorldFactory};
use crate::reward::total_reward;
use crate::shield::{check_and_override, gap_ok, lane_move_safe, time_to_collision, safe_longitudinal, LaneContext, SafetyParams};
use crate::sim::{Action, Lateral, Longitudinal, LANES};
use crate::{Error, QNetwork, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IdmVariant {
    NoLaneChange,
    WithLaneChange,
}

/// A target-lane front gap must beat the current one by this much (m).
pub const LANE_CHANGE_INCENTIVE: f64 = 10.0;

/// Rule-based baseline: time-to-collision thresholds on the preceding car,
/// accelerating towards `v_des` when the road ahead is clear. The lane-change
/// variant moves to an adjacent lane offering a sufficiently larger front
/// gap when the gap constraint holds there.
pub fn idm_baseline(aff: &AffordanceVector, ctx: &LaneContext, variant: IdmVariant, p: &SafetyParams, v_des: f64) -> Action {
    let (d, closing) = aff.slot(LaneRole::Center, Side::Front).gap_and_closing(Side::Front);
    let ttc = time_to_collision(d, closing);
    let lon = if ttc > p.accel_ttc && gap_ok(d, closing, p) {
        if aff.ego_speed() < v_des {
            Longitudinal::Accelerate
        } else {
            Longitudinal::Maintain
        }
    } else {
        safe_longitudinal(ttc, p)
    };

    let mut lat = Lateral::Keep;
    if variant == IdmVariant::WithLaneChange && ctx.maneuver.is_none() {
        for (role, dir) in [(LaneRole::Left, Lateral::ChangeLeft), (LaneRole::Right, Lateral::ChangeRight)] {
            let target = ctx.lane as isize + dir.lane_delta();
            if target < 0 || target >= LANES as isize {
                continue;
            }
            let gap = aff.slot(role, Side::Front).d_x;
            if gap >= d + LANE_CHANGE_INCENTIVE && lane_move_safe(aff, ctx.lane, target as usize, p) {
                lat = dir;
                break;
            }
        }
    }
    Action::new(lon, lat)
}

pub enum Policy<'a> {
    Greedy(&'a QNetwork),
    Idm(IdmVariant),
}

impl Policy<'_> {
    pub fn name(&self) -> &'static str {
        match self {
            Policy::Greedy(_) => "ddqn",
            Policy::Idm(IdmVariant::NoLaneChange) => "idm",
            Policy::Idm(IdmVariant::WithLaneChange) => "idm_lane_change",
        }
    }

    fn act(&self, raw: &AffordanceVector, norm: &AffordanceVector, ctx: &LaneContext, env: &EnvConfig) -> Result<Action> {
        match self {
            Policy::Greedy(q) => Ok(Action::from_index(q.argmax(&norm.0)?).expect("network output within action space")),
            Policy::Idm(v) => Ok(idm_baseline(raw, ctx, *v, &env.safety, env.reward.v_des)),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalSettings {
    pub episodes: u64,
    pub steps: usize,
    pub shield: bool,
}

impl Default for EvalSettings {
    fn default() -> Self {
        Self { episodes: 50, steps: 200, shield: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpisodeSummary {
    pub reward_per_decision: f64,
    pub mean_speed: f64,
    pub steps: u32,
    pub collided: bool,
    pub shield_triggers: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalMetrics {
    pub episodes: u64,
    pub mean_reward_per_decision: f64,
    pub mean_speed: f64,
    pub collisions: u32,
    pub shield_triggers: u32,
    pub per_episode: Vec<EpisodeSummary>,
}

/// Greedy episodes at a fixed traffic count; deterministic per seed.
pub fn evaluate_policy(policy: &Policy<'_>, env: &EnvConfig, n_cars: usize, seed: u64, settings: &EvalSettings) -> Result<EvalMetrics> {
    let factory = WorldFactory::new(env.clone(), seed, Density::new(n_cars, n_cars)?);
    evaluate_on(policy, &factory, settings)
}

pub fn evaluate_on(policy: &Policy<'_>, factory: &WorldFactory, settings: &EvalSettings) -> Result<EvalMetrics> {
    let env = &factory.env;
    let mut per_episode = Vec::with_capacity(settings.episodes as usize);
    for k in 0..settings.episodes {
        let mut sim = factory.build(k)?;
        let (mut raw, mut norm) = env.observe(&sim);
        let mut sum = EpisodeSummary { reward_per_decision: 0.0, mean_speed: 0.0, steps: 0, collided: false, shield_triggers: 0 };
        for _ in 0..settings.steps {
            let ctx = LaneContext::of(sim.world.ego());
            let mut a = policy.act(&raw, &norm, &ctx, env)?;
            if settings.shield {
                let v = check_and_override(&raw, a, &ctx, &env.safety);
                sum.shield_triggers += u32::from(v.overridden);
                a = v.executed;
            }
            let out = sim.step(a);
            let (raw_next, norm_next) = env.observe(&sim);
            sum.reward_per_decision += total_reward(&raw, &raw_next, a.index(), out.ego_collided, &env.reward);
            sum.mean_speed += sim.world.ego().v_x;
            sum.steps += 1;
            sum.collided |= out.ego_collided;
            if out.collision.is_some() {
                break;
            }
            raw = raw_next;
            norm = norm_next;
        }
        let n = f64::from(sum.steps.max(1));
        sum.reward_per_decision /= n;
        sum.mean_speed /= n;
        per_episode.push(sum);
    }
    let n = per_episode.len().max(1) as f64;
    Ok(EvalMetrics {
        episodes: settings.episodes,
        mean_reward_per_decision: per_episode.iter().map(|e| e.reward_per_decision).sum::<f64>() / n,
        mean_speed: per_episode.iter().map(|e| e.mean_speed).sum::<f64>() / n,
        collisions: per_episode.iter().map(|e| u32::from(e.collided)).sum(),
        shield_triggers: per_episode.iter().map(|e| e.shield_triggers).sum(),
        per_episode,
    })
}

pub const DEFAULT_DENSITIES: [usize; 6] = [5, 10, 15, 20, 25, 30];

/// Mean ego speed of each policy at one traffic density.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub density: usize,
    pub idm_speed: f64,
    pub idm_lane_change_speed: f64,
    pub ddqn_speed: f64,
    pub idm_collisions: u32,
    pub idm_lane_change_collisions: u32,
    pub ddqn_collisions: u32,
}

/// Evaluates both IDM variants and the trained network on the same
/// scenarios at each density.
pub fn density_sweep(q: &QNetwork, env: &EnvConfig, densities: &[usize], seed: u64, settings: &EvalSettings) -> Result<Vec<SweepRow>> {
    densities
        .iter()
        .map(|&n| {
            let idm = evaluate_policy(&Policy::Idm(IdmVariant::NoLaneChange), env, n, seed, settings)?;
            let lc = evaluate_policy(&Policy::Idm(IdmVariant::WithLaneChange), env, n, seed, settings)?;
            let dq = evaluate_policy(&Policy::Greedy(q), env, n, seed, settings)?;
            Ok(SweepRow {
                density: n,
                idm_speed: idm.mean_speed,
                idm_lane_change_speed: lc.mean_speed,
                ddqn_speed: dq.mean_speed,
                idm_collisions: idm.collisions,
                idm_lane_change_collisions: lc.collisions,
                ddqn_collisions: dq.collisions,
            })
        })
        .collect()
}

/// Trailing moving average; the first points average what is available.
pub fn moving_average(xs: &[f64], window: usize) -> Vec<f64> {
    let w = window.max(1);
    let mut out = Vec::with_capacity(xs.len());
    let mut acc = 0.0;
    for i in 0..xs.len() {
        acc += xs[i];
        if i >= w {
            acc -= xs[i - w];
        }
        out.push(acc / (i + 1).min(w) as f64);
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurvePoint {
    pub index: usize,
    pub mean: f64,
    pub lower: f64,
    pub upper: f64,
}

/// Pointwise mean across runs with a `±1.96·stderr` band, after smoothing
/// each run with a trailing window.
pub fn learning_curve(runs: &[Vec<f64>], window: usize) -> Result<Vec<CurvePoint>> {
    if runs.len() < 2 {
        return Err(Error::Config("a learning curve needs at least two runs".into()));
    }
    let len = runs[0].len();
    if runs.iter().any(|r| r.len() != len) {
        return Err(Error::Shape("runs differ in length".into()));
    }
    let smoothed: Vec<Vec<f64>> = runs.iter().map(|r| moving_average(r, window)).collect();
    let k = runs.len() as f64;
    Ok((0..len)
        .map(|i| {
            let mean = smoothed.iter().map(|r| r[i]).sum::<f64>() / k;
            let var = smoothed.iter().map(|r| (r[i] - mean).powi(2)).sum::<f64>() / (k - 1.0);
            let half = 1.96 * (var / k).sqrt();
            CurvePoint { index: i, mean, lower: mean - half, upper: mean + half }
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AdaptationRow {
    pub episode: usize,
    pub triggers_adapted: f64,
    pub triggers_frozen: f64,
    pub smoothed_adapted: f64,
    pub smoothed_frozen: f64,
}

pub fn adaptation_rows(adapted: &[f64], frozen: &[f64], window: usize) -> Vec<AdaptationRow> {
    let sa = moving_average(adapted, window);
    let sf = moving_average(frozen, window);
    (0..adapted.len().min(frozen.len()))
        .map(|i| AdaptationRow {
            episode: i,
            triggers_adapted: adapted[i],
            triggers_frozen: frozen[i],
            smoothed_adapted: sa[i],
            smoothed_frozen: sf[i],
        })
        .collect()
}

/// Side-by-side curves: `episode` then `<name>_mean,<name>_lower,<name>_upper`
/// for each named curve.
pub fn write_curves<W: Write>(out: W, curves: &[(&str, Vec<CurvePoint>)]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["episode".to_string()];
    for (name, _) in curves {
        header.extend(["mean", "lower", "upper"].map(|s| format!("{name}_{s}")));
    }
    w.write_record(&header)?;
    let len = curves.iter().map(|c| c.1.len()).min().unwrap_or(0);
    for i in 0..len {
        let mut row = vec![i.to_string()];
        for (_, c) in curves {
            row.extend([c[i].mean, c[i].lower, c[i].upper].map(|x| x.to_string()));
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_csv<W: Write, R: Serialize>(out: W, rows: &[R]) -> Result<()> {
    crate::ddqn::write_training_log(out, rows)
}
