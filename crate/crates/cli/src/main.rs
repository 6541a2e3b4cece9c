//! Command-line driver: training, evaluation and the comparison studies.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 runtime error.

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use safe_ddqn::config::{parse_assignment, parse_table, RunConfig};
use safe_ddqn::ddqn::{adapt, write_training_log, AdaptConfig, EpisodeLog, ReplayMode, TrainConfig, Trainer};
use safe_ddqn::eval::{adaptation_rows, density_sweep, evaluate_policy, learning_curve, write_csv, write_curves, CurvePoint, EvalSettings, Policy};
use safe_ddqn::qnet::{read_checkpoint_header, Checkpoint};
use safe_ddqn::Error;

/// Environment variable naming the default output root.
const OUT_ENV: &str = "SAFE_DDQN_OUT";

#[derive(Parser)]
#[command(name = "safe-ddqn", version, about = "Safety-shielded double DQN for highway lane changes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a policy (resumes when --checkpoint is given).
    Train(Common),
    /// Greedy shielded evaluation of a checkpoint.
    Evaluate(Common),
    /// Mean speed against traffic density for the checkpoint and IDM baselines.
    SweepDensity(Common),
    /// Learning curves of dual-buffer against prioritized replay.
    CompareReplay(Common),
    /// Learning curves with and without the shield.
    CompareShield(Common),
    /// Continuous adaptation of a checkpoint against a frozen copy.
    Adapt(Common),
    /// Print a checkpoint header.
    InspectCheckpoint {
        path: PathBuf,
    },
}

#[derive(Args)]
struct Common {
    /// Flat key = value configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    episodes: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Disable the shield's overrides during training.
    #[arg(long)]
    no_shield: bool,
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    /// Output directory of this run.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override any configuration key, e.g. `--set learning_rate=1e-3`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

impl Common {
    /// Defaults, then the file, then `--set`, then dedicated flags.
    fn resolve(&self) -> Result<RunConfig> {
        let mut table = match &self.config {
            Some(p) => {
                let text = fs::read_to_string(p).with_context(|| format!("reading config {}", p.display()))?;
                parse_table(&text)?
            }
            None => Default::default(),
        };
        for s in &self.set {
            let (k, v) = parse_assignment(s)?;
            table.insert(k, v);
        }
        if let Some(e) = self.episodes {
            table.insert("episodes".into(), (e as i64).into());
        }
        if let Some(s) = self.seed {
            table.insert("seed".into(), (s as i64).into());
        }
        if self.no_shield {
            table.insert("shield".into(), false.into());
        }
        if let Some(o) = &self.out {
            table.insert("out_dir".into(), o.display().to_string().into());
        }
        Ok(RunConfig::from_flat(table)?)
    }
}

fn out_dir(cfg: &RunConfig, command: &str) -> Result<PathBuf> {
    let dir = match &cfg.out_dir {
        Some(d) => d.clone(),
        None => {
            let root = std::env::var_os(OUT_ENV).map_or_else(|| PathBuf::from("runs"), PathBuf::from);
            root.join(format!("{command}-seed{}", cfg.train.seed))
        }
    };
    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    // The location is not part of the run; a replayed snapshot picks its own.
    let snapshot = RunConfig { out_dir: None, ..cfg.clone() };
    fs::write(dir.join("config.snapshot"), snapshot.to_toml_string())?;
    Ok(dir)
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?))
}

fn load_params(cfg: &RunConfig, path: Option<&Path>) -> Result<Checkpoint<f64>> {
    let Some(path) = path else { bail!(Error::Config("--checkpoint is required".into())) };
    Ok(Checkpoint::load(path, Some(&cfg.qnet.sizes()))?)
}

fn train_one(cfg: &RunConfig, train: TrainConfig, dir: Option<&Path>, resume: Option<Checkpoint<f64>>) -> Result<Trainer> {
    let mut t = match resume {
        Some(c) => Trainer::resume(cfg.env.clone(), train, &cfg.qnet, c)?,
        None => Trainer::new(cfg.env.clone(), train, &cfg.qnet)?,
    };
    if let Some(dir) = dir {
        t.set_audit_log(Box::new(create(&dir.join("shield_audit.csv"))?))?;
    }
    let total = t.config().episodes;
    while t.episode() < total {
        let log = t.run_episode()?;
        if (log.episode + 1) % 100 == 0 {
            eprintln!(
                "episode {:>6}  reward/decision {:>8.4}  eps {:.3}  triggers {:>3}  collisions {}",
                log.episode + 1,
                log.reward_per_decision,
                log.epsilon,
                log.shield_triggers,
                log.collisions
            );
        }
    }
    t.train()?;
    Ok(t)
}

fn cmd_train(c: &Common) -> Result<()> {
    let cfg = c.resolve()?;
    let resume = c.checkpoint.as_deref().map(|p| load_params(&cfg, Some(p))).transpose()?;
    let dir = out_dir(&cfg, "train")?;
    let t = train_one(&cfg, cfg.train.clone(), Some(&dir), resume)?;
    write_training_log(create(&dir.join("training_log.csv"))?, t.log())?;
    write_csv(create(&dir.join("eval_log.csv"))?, t.evals())?;
    t.save_checkpoint(&dir.join("final.ckpt"))?;
    println!("{}", dir.display());
    Ok(())
}

fn settings(cfg: &RunConfig) -> EvalSettings {
    EvalSettings { episodes: cfg.study.sweep_episodes, steps: cfg.train.steps_per_episode, shield: true }
}

fn cmd_evaluate(c: &Common) -> Result<()> {
    let cfg = c.resolve()?;
    let ckpt = load_params(&cfg, c.checkpoint.as_deref())?;
    let dir = out_dir(&cfg, "evaluate")?;
    let m = evaluate_policy(&Policy::Greedy(&ckpt.online), &cfg.env, cfg.study.evaluate_density, cfg.study.sweep_seed, &settings(&cfg))?;
    write_csv(create(&dir.join("evaluation.csv"))?, &m.per_episode)?;
    println!(
        "episodes {}  reward/decision {:.4}  mean speed {:.2}  collisions {}  shield triggers {}",
        m.episodes, m.mean_reward_per_decision, m.mean_speed, m.collisions, m.shield_triggers
    );
    Ok(())
}

fn cmd_sweep(c: &Common) -> Result<()> {
    let cfg = c.resolve()?;
    let ckpt = load_params(&cfg, c.checkpoint.as_deref())?;
    let dir = out_dir(&cfg, "sweep-density")?;
    let rows = density_sweep(&ckpt.online, &cfg.env, &cfg.study.sweep_densities, cfg.study.sweep_seed, &settings(&cfg))?;
    write_csv(create(&dir.join("density_sweep.csv"))?, &rows)?;
    for r in &rows {
        println!("density {:>3}  idm {:.2}  idm+lc {:.2}  ddqn {:.2}", r.density, r.idm_speed, r.idm_lane_change_speed, r.ddqn_speed);
    }
    Ok(())
}

/// Runs `study.runs` seeds per arm and writes both curves side by side.
fn cmd_compare(c: &Common, command: &str, arms: [(&str, fn(&mut TrainConfig)); 2]) -> Result<()> {
    let cfg = c.resolve()?;
    let dir = out_dir(&cfg, command)?;
    let mut curves: Vec<Vec<CurvePoint>> = Vec::new();
    for (name, tweak) in arms {
        let mut runs = Vec::new();
        for k in 0..cfg.study.runs as u64 {
            let mut train = TrainConfig { seed: cfg.train.seed + k, ..cfg.train.clone() };
            tweak(&mut train);
            eprintln!("{name}: run {} of {}", k + 1, cfg.study.runs);
            let t = train_one(&cfg, train, None, None)?;
            write_training_log(create(&dir.join(format!("training_log_{name}_{k}.csv")))?, t.log())?;
            runs.push(t.log().iter().map(|l: &EpisodeLog| l.reward_per_decision).collect::<Vec<f64>>());
        }
        curves.push(learning_curve(&runs, cfg.study.curve_window)?);
    }
    let named: Vec<(&str, Vec<CurvePoint>)> = arms.iter().map(|a| a.0).zip(curves).collect();
    write_curves(create(&dir.join("learning_curve.csv"))?, &named)?;
    Ok(())
}

fn cmd_adapt(c: &Common) -> Result<()> {
    let cfg = c.resolve()?;
    let ckpt = load_params(&cfg, c.checkpoint.as_deref())?;
    let dir = out_dir(&cfg, "adapt")?;
    let frozen_cfg = AdaptConfig { learning_rate: 0.0, ..cfg.adapt.clone() };
    let adapted = adapt(&ckpt.online, &cfg.train, &cfg.adapt, &cfg.env, &cfg.qnet)?;
    let frozen = adapt(&ckpt.online, &cfg.train, &frozen_cfg, &cfg.env, &cfg.qnet)?;
    let rows = adaptation_rows(&adapted.triggers(), &frozen.triggers(), cfg.study.curve_window);
    write_csv(create(&dir.join("adaptation_triggers.csv"))?, &rows)?;
    Checkpoint::new(adapted.params).save(&dir.join("adapted.ckpt"))?;
    if let Some(last) = rows.last() {
        println!("final smoothed triggers: adapted {:.3}  frozen {:.3}", last.smoothed_adapted, last.smoothed_frozen);
    }
    Ok(())
}

fn cmd_inspect(path: &Path) -> Result<()> {
    let h = read_checkpoint_header(path)?;
    let hash: String = h.ordering_hash.iter().map(|b| format!("{b:02x}")).collect();
    println!("format version   {}", h.version);
    println!("layer sizes      {:?}", h.sizes);
    println!("leak             {}", h.leak);
    println!("affordance hash  {hash}");
    println!("episode          {}", h.episode);
    println!("parameters       {}", h.n_params);
    println!("target/adam/rng  {}/{}/{}", h.has_target, h.has_adam, h.has_rng);
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match &cli.command {
        Command::Train(c) => cmd_train(c),
        Command::Evaluate(c) => cmd_evaluate(c),
        Command::SweepDensity(c) => cmd_sweep(c),
        Command::CompareReplay(c) => cmd_compare(
            c,
            "compare-replay",
            [("dual_buffer", |t| t.replay = ReplayMode::DualBuffer), ("per", |t| t.replay = ReplayMode::Per)],
        ),
        Command::CompareShield(c) => {
            cmd_compare(c, "compare-shield", [("shield", |t| t.shield = true), ("no_shield", |t| t.shield = false)])
        }
        Command::Adapt(c) => cmd_adapt(c),
        Command::InspectCheckpoint { path } => cmd_inspect(path),
    }
}

fn is_usage(e: &anyhow::Error) -> bool {
    matches!(e.downcast_ref::<Error>(), Some(Error::Config(_) | Error::TrafficCount { .. }))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(if is_usage(&e) { 1 } else { 2 })
        }
    }
}
