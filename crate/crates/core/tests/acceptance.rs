//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on any
//! failure. Training-based criteria run at desk scale and take a while.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use safe_ddqn::affordance::AFFORDANCE_LEN;
use safe_ddqn::ddqn::{adapt, compute_targets, AdaptConfig, ReplayMode, TrainConfig, Trainer, Transition};
use safe_ddqn::env::{Density, EnvConfig, WorldFactory};
use safe_ddqn::eval::{density_sweep, evaluate_policy, moving_average, write_csv, EvalSettings, Policy, SweepRow, DEFAULT_DENSITIES};
use safe_ddqn::qnet::{QNetConfig, Sample, ARCHITECTURE};
use safe_ddqn::reward::{headway_reward, lane_reward, speed_reward};
use safe_ddqn::shield::{check_and_override, gap_ok, safe_longitudinal, time_to_collision, LaneContext, SafetyParams};
use safe_ddqn::sim::{Action, Longitudinal, LateralOutcome, LANES};
use safe_ddqn::QNetwork;

type Outcome = Result<String, String>;

const SEEDS: [u64; 3] = [0, 1, 2];
const DESK_EPISODES: u64 = 500;
const DESK_DENSITY: usize = 10;
const FINAL_WINDOW: usize = 100;

fn desk_train(seed: u64, shield: bool, replay: ReplayMode) -> TrainConfig {
    TrainConfig {
        episodes: DESK_EPISODES,
        epsilon_anneal_episodes: DESK_EPISODES * 7 / 10,
        target_sync_episodes: 10,
        traffic_min: DESK_DENSITY,
        traffic_max: DESK_DENSITY,
        eval_every: 0,
        seed,
        shield,
        replay,
        ..TrainConfig::default()
    }
}

fn desk_qnet() -> QNetConfig {
    QNetConfig { learning_rate: 2e-3, ..QNetConfig::default() }
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len().max(1) as f64
}

struct Run {
    seed: u64,
    rewards: Vec<f64>,
    collisions: u32,
    online: QNetwork,
}

impl Run {
    fn final_mean(&self) -> f64 {
        mean(&self.rewards[self.rewards.len().saturating_sub(FINAL_WINDOW)..])
    }
}

fn train_run(seed: u64, shield: bool, replay: ReplayMode) -> Result<Run, String> {
    let started = Instant::now();
    let mut t = Trainer::new(EnvConfig::default(), desk_train(seed, shield, replay), &desk_qnet()).map_err(|e| e.to_string())?;
    t.train().map_err(|e| e.to_string())?;
    let rewards: Vec<f64> = t.log().iter().map(|l| l.reward_per_decision).collect();
    let collisions = t.log().iter().map(|l| l.collisions).sum();
    let run = Run { seed, rewards, collisions, online: t.into_online() };
    eprintln!(
        "  trained seed {seed} shield={shield} replay={replay:?}: final-{FINAL_WINDOW} {:.4}, {collisions} collisions, {:.0}s",
        run.final_mean(),
        started.elapsed().as_secs_f64()
    );
    Ok(run)
}

#[derive(Default)]
struct Runs {
    shielded: Vec<Run>,
    unshielded: Vec<Run>,
    per: Vec<Run>,
}

impl Runs {
    fn shielded(&mut self) -> Result<&[Run], String> {
        if self.shielded.is_empty() {
            self.shielded = SEEDS.iter().map(|&s| train_run(s, true, ReplayMode::DualBuffer)).collect::<Result<_, _>>()?;
        }
        Ok(&self.shielded)
    }
}

fn check(cond: bool, what: String, failures: &mut Vec<String>) {
    if !cond {
        failures.push(what);
    }
}

fn verdict(summary: String, failures: Vec<String>) -> Outcome {
    if failures.is_empty() {
        Ok(summary)
    } else {
        Err(format!("{summary}; {}", failures.join("; ")))
    }
}

fn criterion_1() -> Outcome {
    let cases = [
        ("r_v(20,30)", speed_reward(20.0, 30.0), (-10.0f64).exp() - 1.0),
        ("r_y(0,3.8)", lane_reward(0.0, 3.8), (-1.444f64).exp() - 1.0),
        ("r_x(20,40)", headway_reward(20.0, 40.0), (-1.0f64).exp() - 1.0),
    ];
    let mut failures = Vec::new();
    let mut worst = 0.0f64;
    for (name, got, want) in cases {
        let err = (got - want).abs();
        worst = worst.max(err);
        check(err <= 1e-9, format!("{name} = {got} vs {want}"), &mut failures);
    }
    verdict(format!("max abs error {worst:.1e}"), failures)
}

fn random_net(rng: &mut ChaCha8Rng, sizes: &[usize]) -> QNetwork {
    let leak = rng.gen_range(0.01..0.3);
    let mut q = QNetwork::he_uniform(sizes, leak, rng).unwrap();
    for p in q.params_mut() {
        *p += rng.gen_range(-0.1..0.1);
    }
    q
}

fn criterion_2() -> Outcome {
    let h = 1e-5;
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut failures = Vec::new();
    let mut worst = 0.0f64;
    let n_cases = 24;
    for case in 0..n_cases {
        let sizes: Vec<usize> = if case < 4 {
            ARCHITECTURE.to_vec()
        } else {
            let mut s = vec![rng.gen_range(2..9)];
            for _ in 0..rng.gen_range(1..3) {
                s.push(rng.gen_range(3..11));
            }
            s.push(rng.gen_range(2..7));
            s
        };
        let net = random_net(&mut rng, &sizes);
        let batch_len = rng.gen_range(1..7);
        let inputs: Vec<Vec<f64>> = (0..batch_len).map(|_| (0..sizes[0]).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
        let batch: Vec<Sample<'_, f64>> = inputs
            .iter()
            .map(|x| Sample { input: x, action: rng.gen_range(0..*sizes.last().unwrap()), target: rng.gen_range(-2.0..2.0) })
            .collect();
        let (_, grad) = net.loss_and_gradient(&batch).unwrap();
        let mut probe = net.clone();
        let mut max_diff = 0.0f64;
        let mut max_mag = 0.0f64;
        for i in 0..grad.len() {
            let p0 = probe.params()[i];
            probe.params_mut()[i] = p0 + h;
            let up = probe.loss_and_gradient(&batch).unwrap().0;
            probe.params_mut()[i] = p0 - h;
            let down = probe.loss_and_gradient(&batch).unwrap().0;
            probe.params_mut()[i] = p0;
            let numeric = (up - down) / (2.0 * h);
            max_diff = max_diff.max((numeric - grad[i]).abs());
            max_mag = max_mag.max(numeric.abs()).max(grad[i].abs());
        }
        let rel = max_diff / max_mag.max(1e-12);
        worst = worst.max(rel);
        check(rel < 1e-4, format!("case {case} {sizes:?}: relative error {rel:.2e}"), &mut failures);
    }
    verdict(format!("{n_cases} cases, worst relative error {worst:.2e}"), failures)
}

fn criterion_3() -> Outcome {
    let p = SafetyParams::default();
    let mut failures = Vec::new();
    let mut grid = 0;
    for d_step in 0..=20 {
        let d = f64::from(d_step * 5);
        for v_step in 0..=15 {
            let v = f64::from(-10 + 2 * v_step);
            grid += 1;
            let want_gap = d - 3.0 * v > 15.0;
            check(gap_ok(d, v, &p) == want_gap, format!("gap_ok({d},{v})"), &mut failures);
            let ttc = if v > 0.0 { d / v } else { f64::INFINITY };
            let want_lon = if ttc <= 2.0 {
                Longitudinal::HardBrake
            } else if ttc <= 3.0 {
                Longitudinal::Brake
            } else {
                Longitudinal::Maintain
            };
            let got = safe_longitudinal(time_to_collision(d, v), &p);
            check(got == want_lon, format!("safe_longitudinal({d},{v}) = {got:?}"), &mut failures);
        }
    }

    let env = EnvConfig::default();
    let factory = WorldFactory::new(env.clone(), 3, Density::Fixed(DESK_DENSITY));
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let n_states = 10_000u64;
    let mut off_road = 0;
    for k in 0..n_states {
        let mut sim = factory.build(k).map_err(|e| e.to_string())?;
        let lane = if rng.gen_bool(0.5) { 0 } else { LANES - 1 };
        let ego = &mut sim.world.vehicles[0];
        ego.lane = lane;
        ego.y = env.sim.lane_center(lane);
        ego.v_x = rng.gen_range(0.0..env.sim.ego_v_max);
        let proposed = Action::from_index(rng.gen_range(0..Action::COUNT)).unwrap();
        let (raw, _) = env.observe(&sim);
        let verdict = check_and_override(&raw, proposed, &LaneContext::of(sim.world.ego()), &env.safety);
        let outcome = sim.step(verdict.executed);
        let e = sim.world.ego();
        let on_road = e.lane < LANES && e.y >= 0.0 && e.y <= env.sim.road_width();
        if outcome.ego_lateral == LateralOutcome::OffRoad || !on_road {
            off_road += 1;
        }
    }
    check(off_road == 0, format!("{off_road} executed off-road lane changes"), &mut failures);
    verdict(format!("{grid} grid points, {n_states} edge-lane states"), failures)
}

fn one_hot(i: usize) -> safe_ddqn::affordance::AffordanceVector {
    let mut x = [0.0; AFFORDANCE_LEN];
    x[i] = 1.0;
    safe_ddqn::affordance::AffordanceVector(x)
}

/// Linear net whose output `a` at input `e_i` is `table[i][a]`.
fn linear_net(table: &[[f64; Action::COUNT]; 2]) -> QNetwork {
    let mut q = QNetwork::zeros(&[AFFORDANCE_LEN, Action::COUNT], 0.01).unwrap();
    let w = q.params_mut();
    for (i, row) in table.iter().enumerate() {
        for (a, v) in row.iter().enumerate() {
            w[a * AFFORDANCE_LEN + i] = *v;
        }
    }
    q
}

fn criterion_4() -> Outcome {
    let gamma = 0.9;
    let r_col = -10.0;
    let mut online = [[0.0; Action::COUNT]; 2];
    let mut target = [[0.0; Action::COUNT]; 2];
    // State A: online prefers 3, target prefers 5.
    online[0][3] = 2.0;
    online[0][5] = 1.0;
    target[0][3] = 1.0;
    target[0][5] = 2.0;
    // State B: online prefers 7, target prefers 0.
    online[1][7] = 0.4;
    target[1][7] = 0.5;
    target[1][0] = 3.0;
    let q_online = linear_net(&online);
    let q_target = linear_net(&target);

    let (a, b) = (one_hot(0), one_hot(1));
    let batch = [
        Transition::safe(b.clone(), 2, a.clone(), 0.0),
        Transition::safe(a.clone(), 4, b.clone(), -0.5),
        Transition::collision(a.clone(), 9, r_col),
    ];
    let refs: Vec<&Transition> = batch.iter().collect();
    let got = compute_targets(&refs, &q_online, &q_target, gamma).map_err(|e| e.to_string())?;
    let want = [0.0 + gamma * 1.0, -0.5 + gamma * 0.5, r_col];

    let mut failures = Vec::new();
    check(q_online.argmax(&a.0).unwrap() != q_target.argmax(&a.0).unwrap(), "argmax agrees in state A".into(), &mut failures);
    check(q_online.argmax(&b.0).unwrap() != q_target.argmax(&b.0).unwrap(), "argmax agrees in state B".into(), &mut failures);
    check(got == want, format!("targets {got:?} != {want:?}"), &mut failures);
    verdict(format!("targets {got:?}"), failures)
}

fn criteria_5_and_6(runs: &mut Runs) -> (Outcome, Outcome) {
    let result = (|| -> Result<(Vec<f64>, Vec<f64>, u32, u64, Vec<f64>), String> {
        let shielded = runs.shielded()?;
        let s_means: Vec<f64> = shielded.iter().map(Run::final_mean).collect();
        let collisions = shielded.iter().map(|r| r.collisions).sum();
        let episodes = shielded.iter().map(|r| r.rewards.len() as u64).sum();
        let env = EnvConfig::default();
        let settings = EvalSettings::default();
        let greedy = shielded
            .iter()
            .map(|r| evaluate_policy(&Policy::Greedy(&r.online), &env, DESK_DENSITY, 1000, &settings).map(|m| m.mean_reward_per_decision))
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| e.to_string())?;
        let idm = evaluate_policy(&Policy::Idm(safe_ddqn::eval::IdmVariant::NoLaneChange), &env, DESK_DENSITY, 1000, &settings)
            .map_err(|e| e.to_string())?;
        eprintln!("  greedy shielded evaluation per seed {greedy:.4?}; IDM on the same scenarios {:.4}", idm.mean_reward_per_decision);
        runs.unshielded = SEEDS.iter().map(|&s| train_run(s, false, ReplayMode::DualBuffer)).collect::<Result<_, _>>()?;
        let u_means: Vec<f64> = runs.unshielded.iter().map(Run::final_mean).collect();
        Ok((s_means, u_means, collisions, episodes, greedy))
    })();
    let (s_means, u_means, collisions, episodes, greedy) = match result {
        Ok(r) => r,
        Err(e) => return (Err(e.clone()), Err(e)),
    };

    let (s, u) = (mean(&s_means), mean(&u_means));
    let mut failures = Vec::new();
    check(s - u >= 0.1, format!("shielded - unshielded = {:.4} < 0.1", s - u), &mut failures);
    check(s > -0.3, format!("shielded final-{FINAL_WINDOW} mean {s:.4} <= -0.3"), &mut failures);
    let c5 = verdict(
        format!(
            "final-{FINAL_WINDOW} mean shielded {s:.4} {s_means:.4?}, unshielded {u:.4} {u_means:.4?}, greedy shielded eval {:.4}",
            mean(&greedy)
        ),
        failures,
    );

    let rate = f64::from(collisions) / episodes as f64;
    let mut failures = Vec::new();
    check(rate < 0.05, format!("collision rate {rate:.4} >= 0.05"), &mut failures);
    let c6 = verdict(format!("{collisions} ego collisions in {episodes} shielded training episodes ({:.2}%)", 100.0 * rate), failures);
    (c5, c6)
}

fn criterion_7(runs: &mut Runs) -> Outcome {
    let q = runs.shielded()?[0].online.clone();
    let settings = EvalSettings::default();
    let rows = density_sweep(&q, &EnvConfig::default(), &DEFAULT_DENSITIES, 1000, &settings).map_err(|e| e.to_string())?;
    let mut failures = Vec::new();
    let speeds: [(&str, fn(&SweepRow) -> f64); 3] =
        [("idm", |r| r.idm_speed), ("idm_lane_change", |r| r.idm_lane_change_speed), ("ddqn", |r| r.ddqn_speed)];
    for (name, speed) in speeds {
        for w in rows.windows(2) {
            let (lo, hi) = (speed(&w[0]), speed(&w[1]));
            check(hi <= lo + 0.5, format!("{name} speed rises {lo:.2} -> {hi:.2} from density {} to {}", w[0].density, w[1].density), &mut failures);
        }
    }
    let gap = |r: &SweepRow| (r.ddqn_speed - r.idm_speed).abs();
    let (first, last) = (&rows[0], &rows[rows.len() - 1]);
    check(gap(last) < gap(first), format!("gap at {} ({:.2}) not below gap at {} ({:.2})", last.density, gap(last), first.density, gap(first)), &mut failures);
    let table: Vec<String> = rows.iter().map(|r| format!("{}:{:.1}/{:.1}/{:.1}", r.density, r.idm_speed, r.idm_lane_change_speed, r.ddqn_speed)).collect();
    verdict(format!("speeds idm/idm_lc/ddqn {}", table.join(" ")), failures)
}

fn criterion_8(runs: &mut Runs) -> Outcome {
    let q = runs.shielded()?[0].online.clone();
    let base = desk_train(0, true, ReplayMode::DualBuffer);
    let env = EnvConfig::default();
    let qcfg = desk_qnet();
    let episodes = 2000;
    let run = |lr: f64| {
        let started = Instant::now();
        let out = adapt(&q, &base, &AdaptConfig { episodes, learning_rate: lr, seed: 1 }, &env, &qcfg).map_err(|e| e.to_string());
        eprintln!("  adaptation at lr {lr:e}: {:.0}s", started.elapsed().as_secs_f64());
        out
    };
    let adapted = run(1e-5)?.triggers();
    let frozen = run(0.0)?.triggers();
    let window = 100;
    let third = episodes as usize * 2 / 3;
    let a = mean(&moving_average(&adapted, window)[third..]);
    let f = mean(&moving_average(&frozen, window)[third..]);
    let mut failures = Vec::new();
    check(a < f, format!("adapted {a:.3} not below frozen {f:.3}"), &mut failures);
    verdict(
        format!("final-third windowed triggers per episode adapted {a:.3}, frozen {f:.3}, adapted total {}", adapted.iter().sum::<f64>()),
        failures,
    )
}

fn criterion_9(runs: &mut Runs) -> Outcome {
    let dual = mean(&runs.shielded()?.iter().map(Run::final_mean).collect::<Vec<_>>());
    runs.per = SEEDS.iter().map(|&s| train_run(s, true, ReplayMode::Per)).collect::<Result<_, _>>()?;
    let per_means: Vec<f64> = runs.per.iter().map(Run::final_mean).collect();
    let per = mean(&per_means);
    let mut failures = Vec::new();
    check((dual - per).abs() <= 0.1, format!("difference {:.4} > 0.1", (dual - per).abs()), &mut failures);
    let seeds: Vec<u64> = runs.per.iter().map(|r| r.seed).collect();
    verdict(format!("final-{FINAL_WINDOW} mean dual-buffer {dual:.4}, PER {per:.4} {per_means:.4?} over seeds {seeds:?}"), failures)
}

/// Artifacts of one short pipeline: train, checkpoint, evaluate, sweep, adapt.
fn pipeline(replay: ReplayMode) -> Result<Vec<(String, Vec<u8>)>, String> {
    let e = |e: safe_ddqn::Error| e.to_string();
    let env = EnvConfig::default();
    let cfg = TrainConfig {
        episodes: 12,
        steps_per_episode: 60,
        epsilon_anneal_episodes: 8,
        target_sync_episodes: 3,
        batch_size: 8,
        eval_every: 6,
        eval_episodes: 2,
        traffic_min: 5,
        traffic_max: 15,
        seed: 9,
        replay,
        ..TrainConfig::default()
    };
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut t = Trainer::new(env.clone(), cfg.clone(), &desk_qnet()).map_err(e)?;
    let audit = std::fs::File::create(dir.path().join("audit.csv")).map_err(|e| e.to_string())?;
    t.set_audit_log(Box::new(audit)).map_err(e)?;
    t.train().map_err(e)?;
    let ckpt = dir.path().join("final.ckpt");
    t.save_checkpoint(&ckpt).map_err(e)?;

    let mut out = Vec::new();
    let mut log = Vec::new();
    safe_ddqn::ddqn::write_training_log(&mut log, t.log()).map_err(e)?;
    out.push(("training_log".into(), log));
    let mut evals = Vec::new();
    safe_ddqn::ddqn::write_training_log(&mut evals, t.evals()).map_err(e)?;
    out.push(("eval_log".into(), evals));
    out.push(("checkpoint".into(), std::fs::read(&ckpt).map_err(|e| e.to_string())?));
    drop(t);
    out.push(("shield_audit".into(), std::fs::read(dir.path().join("audit.csv")).map_err(|e| e.to_string())?));

    let q = safe_ddqn::qnet::Checkpoint::<f64>::load(&ckpt, Some(&ARCHITECTURE)).map_err(e)?.online;
    let settings = EvalSettings { episodes: 3, steps: 60, shield: true };
    let m = evaluate_policy(&Policy::Greedy(&q), &env, 10, 4, &settings).map_err(e)?;
    let mut buf = Vec::new();
    write_csv(&mut buf, &m.per_episode).map_err(e)?;
    out.push(("evaluation".into(), buf));
    let rows = density_sweep(&q, &env, &[5, 20], 4, &settings).map_err(e)?;
    let mut buf = Vec::new();
    write_csv(&mut buf, &rows).map_err(e)?;
    out.push(("density_sweep".into(), buf));
    let adapted = adapt(&q, &cfg, &AdaptConfig { episodes: 3, learning_rate: 1e-5, seed: 2 }, &env, &desk_qnet()).map_err(e)?;
    let mut buf = Vec::new();
    write_csv(&mut buf, &adapted.log).map_err(e)?;
    out.push(("adaptation_log".into(), buf));
    out.push(("adapted_params".into(), safe_ddqn::qnet::Checkpoint::new(adapted.params).to_bytes()));
    Ok(out)
}

fn criterion_10() -> Outcome {
    let mut failures = Vec::new();
    let mut compared = 0;
    for replay in [ReplayMode::DualBuffer, ReplayMode::Per] {
        let first = pipeline(replay)?;
        let second = pipeline(replay)?;
        for ((name, a), (_, b)) in first.iter().zip(&second) {
            compared += 1;
            check(!a.is_empty() && a == b, format!("{replay:?} {name} differs between repeats"), &mut failures);
        }
    }
    verdict(format!("{compared} artifacts byte-identical across repeats"), failures)
}

fn report(n: u8, name: &str, started: Instant, outcome: Outcome, failed: &mut u32) {
    let secs = started.elapsed().as_secs_f64();
    match outcome {
        Ok(detail) => println!("criterion {n} ({name}): PASS [{secs:.0}s] {detail}"),
        Err(detail) => {
            *failed += 1;
            println!("criterion {n} ({name}): FAIL [{secs:.0}s] {detail}");
        }
    }
}

fn guarded<T>(f: impl FnOnce() -> Result<T, String>) -> Result<T, String> {
    catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
        let msg = p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()));
        Err(format!("panicked: {}", msg.unwrap_or_default()))
    })
}

fn main() {
    // Criterion numbers on the command line select a subset; none runs all.
    let args: Vec<String> = std::env::args().skip(1).collect();
    if args.iter().any(|a| a == "--list") {
        return;
    }
    let only: Vec<u8> = args.iter().filter_map(|a| a.parse().ok()).collect();
    let wanted = |n: u8| only.is_empty() || only.contains(&n);
    let mut failed = 0;
    let mut ran = 0;
    let mut runs = Runs::default();

    let simple: [(u8, &str, fn() -> Outcome); 4] = [
        (1, "reward closed forms", criterion_1),
        (2, "gradient check", criterion_2),
        (3, "shield rules", criterion_3),
        (4, "double DQN targets", criterion_4),
    ];
    for (n, name, f) in simple {
        if wanted(n) {
            ran += 1;
            let t = Instant::now();
            report(n, name, t, guarded(f), &mut failed);
        }
    }
    if wanted(5) || wanted(6) {
        ran += 2;
        let t = Instant::now();
        let (c5, c6) = guarded(|| Ok(criteria_5_and_6(&mut runs))).unwrap_or_else(|e| (Err(e.clone()), Err(e)));
        report(5, "shield enables learning", t, c5, &mut failed);
        report(6, "collision-free shielded training", t, c6, &mut failed);
    }
    let trained: [(u8, &str, fn(&mut Runs) -> Outcome); 3] =
        [(7, "density sweep", criterion_7), (8, "adaptation", criterion_8), (9, "replay comparison", criterion_9)];
    for (n, name, f) in trained {
        if wanted(n) {
            ran += 1;
            let t = Instant::now();
            report(n, name, t, guarded(|| f(&mut runs)), &mut failed);
        }
    }
    if wanted(10) {
        ran += 1;
        let t = Instant::now();
        report(10, "determinism", t, guarded(criterion_10), &mut failed);
    }

    println!("acceptance: {} of {ran} criteria passed", ran - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
