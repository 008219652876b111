use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use rlfd_core::dmp::{fit_from_demo, rollout, DmpGains, NoInjection, Trajectory};
use rlfd_core::env::make_task;
use rlfd_core::learn::{load_checkpoint, save_checkpoint, write_training_curve, RewardSpec};
use rlfd_core::orientation::{fit_orientation_dmp, UnitQuaternion};
use rlfd_core::residual::ExplorationLocus;
use rlfd_core::{Dmp, Error, Result};

use rlfd_harness::demo::{synthesize_demo, DemoSpec, N_BASIS_ROTATION, N_BASIS_TRANSLATION};
use rlfd_harness::experiments::{
    emit_outputs, load_spec, run_family, spec_condition, task_config, ExperimentSpec, Family, ResidualKind, Session,
};
use rlfd_harness::runner::{ControlMode, RunnerSettings};
use rlfd_harness::spiral::{max_step_jerk, spiral_variants, SpiralSpec};
use rlfd_harness::train::{evaluate, summarize, train, Learner, LearnerConfig, LearnerKind};

#[derive(Parser)]
#[command(name = "rlfd", version, about = "Residual learning on dynamic movement primitives")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// TOML file overriding experiment settings.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// First seed; multi-seed runs use consecutive seeds from here.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Training episode budget.
    #[arg(long, global = true)]
    episodes: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Fit translational and rotational primitives to a demonstration.
    Fit {
        /// Demonstration CSV; synthesized for `--task` when absent.
        #[arg(long)]
        demo: Option<PathBuf>,
        #[arg(long, default_value = "easy")]
        task: String,
        #[arg(long, default_value_t = N_BASIS_TRANSLATION)]
        n_basis: usize,
        #[arg(long, default_value_t = N_BASIS_ROTATION)]
        n_basis_rotation: usize,
    },
    /// Integrate fitted primitive parameters without a residual.
    Rollout {
        #[arg(long)]
        params: PathBuf,
        #[arg(long, default_value_t = 0.01)]
        dt: f64,
    },
    /// Train one residual learner and save a checkpoint and curve.
    Train {
        #[arg(long, default_value = "easy")]
        task: String,
        #[arg(long, default_value = "task-space", value_parser = parse_locus)]
        locus: ExplorationLocus,
        #[arg(long, default_value = "ppo", value_parser = parse_residual)]
        residual: ResidualKind,
        #[arg(long, default_value = "sparse", value_parser = parse_reward)]
        reward: RewardSpec,
        #[arg(long, default_value = "residual", value_parser = parse_mode)]
        mode: ControlMode,
        #[arg(long)]
        full_pose: bool,
    },
    /// Evaluate a checkpoint, or an untrained residual, on a task.
    Eval {
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long, default_value = "easy")]
        task: String,
        #[arg(long, default_value_t = 200)]
        n: usize,
        #[arg(long)]
        stochastic: bool,
    },
    /// Source-to-target transfer with a few fine-tuning updates.
    Transfer {
        #[arg(long, default_value = "easy")]
        source: String,
        #[arg(long, default_value = "hard")]
        target: String,
        #[arg(long, default_value_t = 3)]
        updates: usize,
    },
    /// Fit the spiral and write the four exploration variants as CSVs.
    SpiralDemo {
        #[arg(long)]
        sigma: Option<f64>,
    },
    /// Run experiment families and write tables and a markdown report.
    Report {
        /// Families to run; all when omitted.
        #[arg(long, value_parser = parse_family, num_args = 1..)]
        family: Vec<Family>,
        #[arg(long)]
        threads: Option<usize>,
        #[arg(long)]
        eval_episodes: Option<usize>,
    },
}

fn parse_locus(s: &str) -> std::result::Result<ExplorationLocus, String> {
    ExplorationLocus::parse(s).ok_or_else(|| format!("unknown locus '{s}'"))
}

fn parse_residual(s: &str) -> std::result::Result<ResidualKind, String> {
    ResidualKind::parse(s).ok_or_else(|| format!("unknown residual kind '{s}'"))
}

fn parse_family(s: &str) -> std::result::Result<Family, String> {
    Family::parse(s).ok_or_else(|| format!("unknown experiment family '{s}'"))
}

fn parse_mode(s: &str) -> std::result::Result<ControlMode, String> {
    match s {
        "residual" => Ok(ControlMode::Residual),
        "pure-rl" => Ok(ControlMode::PureRl),
        "hybrid" => Ok(ControlMode::Hybrid),
        _ => Err(format!("unknown control mode '{s}'")),
    }
}

fn parse_reward(s: &str) -> std::result::Result<RewardSpec, String> {
    match s {
        "sparse" => Ok(RewardSpec::sparse(rlfd_core::env::KAPPA)),
        "dense" => Ok(RewardSpec::dense_default()),
        "exp-l1" => Ok(RewardSpec::ExpL1),
        _ => Err(format!("unknown reward '{s}'")),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e @ Error::InvalidArgument(_)) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

/// Experiment spec from the family defaults, the config file and flags.
fn spec_for(global: &Global, base: ExperimentSpec) -> Result<ExperimentSpec> {
    let mut spec = match &global.config {
        Some(p) => load_spec(p, base)?,
        None => base,
    };
    if let Some(s) = global.seed {
        let n = spec.seeds.len().max(1) as u64;
        spec.seeds = (s..s + n).collect();
    }
    if let Some(e) = global.episodes {
        spec.episodes = e;
        spec.learner_episodes.clear();
    }
    spec.validate()?;
    Ok(spec)
}

fn run(cli: Cli) -> Result<()> {
    let g = &cli.global;
    fs::create_dir_all(&g.out)?;
    match cli.command {
        Command::Fit {
            demo,
            task,
            n_basis,
            n_basis_rotation,
        } => {
            let traj = match demo {
                Some(p) => Trajectory::read_csv(fs::File::open(p)?)?,
                None => synthesize_demo(&DemoSpec::for_task(&make_task(&task)?)),
            };
            let gains = DmpGains::default();
            let translation = fit_from_demo(&traj, n_basis, gains)?;
            let orientations = traj.orientations.clone().unwrap_or_else(|| vec![UnitQuaternion::identity(); traj.len()]);
            let rotation = fit_orientation_dmp(&orientations, traj.dt(), n_basis_rotation, gains)?;
            let path = g.out.join("params.json");
            fs::write(&path, serde_json::to_string_pretty(&json!({ "translation": translation, "rotation": rotation }))?)?;
            println!("{}", path.display());
        }
        Command::Rollout { params, dt } => {
            let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(params)?)?;
            let p: Dmp = serde_json::from_value(v.get("translation").cloned().unwrap_or(v))?;
            let traj = rollout(&p, &p.y0, &p.goal, p.tau, dt, 1, &mut NoInjection)?;
            let path = g.out.join("rollout.csv");
            traj.write_csv(fs::File::create(&path)?)?;
            println!("{}", path.display());
        }
        Command::Train {
            task,
            locus,
            residual,
            reward,
            mode,
            full_pose,
        } => {
            let base = ExperimentSpec {
                name: "train".into(),
                train_task: task.clone(),
                eval_tasks: vec![task.clone()],
                residual,
                locus,
                mode,
                reward: Some(reward),
                full_pose,
                seeds: vec![0],
                ..ExperimentSpec::default()
            };
            let spec = spec_for(g, base)?;
            let Some(kind) = spec.residual.learner() else {
                return Err(Error::InvalidArgument(format!("residual '{}' has nothing to train", spec.residual.name())));
            };
            let cond = spec_condition(&spec);
            cond.validate()?;
            let seed = spec.seeds[0];
            let config = task_config(&spec.train_task, cond.reward)?;
            let mut settings = RunnerSettings::new(&config, cond.locus, cond.mode);
            settings.full_pose = cond.full_pose();
            let session = Session::new(spec.demo.as_deref())?;
            let runner = session.runner(config, settings.clone())?;
            let mut learner = Learner::new(kind, settings.action_dim(), &spec.learner, seed)?;
            let log = train(&mut learner, &runner, spec.budget(spec.residual), None, seed)?;
            write_training_curve(&g.out.join(format!("curve_{seed}.csv")), &log.curve)?;
            let cfg = json!({
                "kind": kind,
                "task": spec.train_task,
                "locus": cond.locus,
                "mode": cond.mode,
                "full_pose": cond.full_pose(),
                "action_dim": settings.action_dim(),
                "learner": spec.learner,
                "demo": spec.demo,
                "seed": seed,
                "episodes": log.episodes,
            });
            let path = save_checkpoint(&g.out.join(format!("checkpoint_{seed}")), kind_name(kind), &learner.networks(), cfg)?;
            println!("{}", path.display());
        }
        Command::Eval {
            checkpoint,
            task,
            n,
            stochastic,
        } => {
            let seed = g.seed.unwrap_or(0);
            let session;
            let (runner, learner) = match checkpoint {
                Some(p) => {
                    let (learner, locus, mode, full_pose, demo) = restore(&p)?;
                    session = Session::new(demo.as_deref())?;
                    let config = make_task(&task)?;
                    let mut settings = RunnerSettings::new(&config, locus, mode);
                    settings.full_pose = full_pose;
                    (session.runner(config, settings)?, Some(learner))
                }
                None => {
                    session = Session::new(None)?;
                    let config = make_task(&task)?;
                    let settings = RunnerSettings::new(&config, ExplorationLocus::None, ControlMode::Residual);
                    (session.runner(config, settings)?, None)
                }
            };
            let dim = runner.settings.action_dim();
            let outcomes = match &learner {
                Some(l) => evaluate(&runner, l.actor(rlfd_harness::runner::rng_for(seed, 31), !stochastic).as_mut(), n, seed)?,
                None => evaluate(&runner, &mut rlfd_harness::runner::ZeroActor(dim), n, seed)?,
            };
            let s = summarize(&outcomes);
            let p = s.success_rate;
            let se = (p * (1.0 - p) / n.max(1) as f64).sqrt();
            println!(
                "task {task}: success {:.1}% ± {:.1} over {n} episodes; peak force {:.2} N, mean force {:.2} N, insertion time {:.2} s",
                100.0 * p,
                100.0 * se,
                s.mean_peak_force,
                s.mean_force,
                s.mean_insertion_time
            );
            fs::write(g.out.join(format!("eval_{task}_{seed}.json")), serde_json::to_string_pretty(&s)?)?;
        }
        Command::Transfer { source, target, updates } => {
            let base = ExperimentSpec {
                train_task: source,
                transfer_task: target,
                transfer_updates: updates,
                ..ExperimentSpec::for_family(Family::Transfer)
            };
            let spec = spec_for(g, base)?;
            let session = Session::new(spec.demo.as_deref())?;
            let table = run_family(&session, Family::Transfer, &spec)?;
            emit_outputs(&[table], &g.out)?;
            print!("{}", fs::read_to_string(g.out.join("report.md"))?);
        }
        Command::SpiralDemo { sigma } => {
            let mut spec = SpiralSpec::default();
            if let Some(s) = sigma {
                spec.sigma = s;
            }
            let seed = g.seed.unwrap_or(0);
            for (tag, locus, traj) in spiral_variants(&spec, seed)? {
                let path = g.out.join(format!("spiral_{tag}_{seed}.csv"));
                traj.write_csv(fs::File::create(&path)?)?;
                println!("{tag} {locus}: max step jerk {:.3}, {}", max_step_jerk(&traj), path.display());
            }
        }
        Command::Report {
            family,
            threads,
            eval_episodes,
        } => {
            let families = if family.is_empty() { Family::ALL.to_vec() } else { family };
            let mut tables = Vec::new();
            let mut session: Option<Session> = None;
            for f in families {
                let mut spec = spec_for(g, ExperimentSpec::for_family(f))?;
                if let Some(t) = threads {
                    spec.threads = t;
                }
                if let Some(n) = eval_episodes {
                    spec.eval_episodes = n;
                }
                let s = match &session {
                    Some(s) => s,
                    None => session.insert(Session::new(spec.demo.as_deref())?),
                };
                tables.push(run_family(s, f, &spec)?);
            }
            emit_outputs(&tables, &g.out)?;
            print!("{}", fs::read_to_string(g.out.join("report.md"))?);
        }
    }
    Ok(())
}

fn kind_name(kind: LearnerKind) -> &'static str {
    match kind {
        LearnerKind::Ppo => "ppo",
        LearnerKind::Sac => "sac",
    }
}

type Restored = (Learner, ExplorationLocus, ControlMode, bool, Option<PathBuf>);

fn restore(path: &Path) -> Result<Restored> {
    let (manifest, nets) = load_checkpoint(path)?;
    let c = &manifest.config;
    let field = |k: &str| c.get(k).cloned().ok_or_else(|| Error::Format(format!("checkpoint lacks '{k}'")));
    let kind: LearnerKind = serde_json::from_value(field("kind")?)?;
    let learner_cfg: LearnerConfig = serde_json::from_value(field("learner")?)?;
    let dim: usize = serde_json::from_value(field("action_dim")?)?;
    let mut learner = Learner::new(kind, dim, &learner_cfg, 0)?;
    learner.load_networks(nets)?;
    Ok((
        learner,
        serde_json::from_value(field("locus")?)?,
        serde_json::from_value(field("mode")?)?,
        serde_json::from_value(field("full_pose")?)?,
        serde_json::from_value(field("demo")?)?,
    ))
}
