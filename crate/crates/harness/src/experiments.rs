//! Experiment families, result tables and output files.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};

use rlfd_core::dmp::Trajectory;
use rlfd_core::env::{env_reset, make_task, EnvConfig, EnvState, KAPPA, PRESETS};
use rlfd_core::learn::{write_training_curve, CurveRow, RewardSpec};
use rlfd_core::orientation::UnitQuaternion;
use rlfd_core::residual::ExplorationLocus;
use rlfd_core::{Error, Result};

use crate::demo::{base_policy_for, fit_base_policy, BasePolicy};
use crate::runner::{
    rng_for, Actor, ControlMode, EpisodeRunner, LinearActor, RandomActor, RunnerSettings, SplitActor, ZeroActor,
};
use crate::train::{episodes_to_reach, evaluate, summarize, train, EvalSummary, Learner, LearnerConfig, LearnerKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ResidualKind {
    None,
    Random,
    Linear,
    Ppo,
    Sac,
}

impl ResidualKind {
    pub const ALL: [ResidualKind; 5] = [
        ResidualKind::None,
        ResidualKind::Random,
        ResidualKind::Linear,
        ResidualKind::Ppo,
        ResidualKind::Sac,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ResidualKind::None => "none",
            ResidualKind::Random => "random",
            ResidualKind::Linear => "linear",
            ResidualKind::Ppo => "ppo",
            ResidualKind::Sac => "sac",
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            ResidualKind::None => "None",
            ResidualKind::Random => "Random",
            ResidualKind::Linear => "Linear",
            ResidualKind::Ppo => "PPO",
            ResidualKind::Sac => "SAC",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name() == s)
    }

    pub fn learner(self) -> Option<LearnerKind> {
        match self {
            ResidualKind::Ppo => Some(LearnerKind::Ppo),
            ResidualKind::Sac => Some(LearnerKind::Sac),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    Locus,
    Strategy,
    Ablation,
    FullPose,
    Transfer,
}

impl Family {
    pub const ALL: [Family; 5] = [Family::Locus, Family::Strategy, Family::Ablation, Family::FullPose, Family::Transfer];

    pub fn name(self) -> &'static str {
        match self {
            Family::Locus => "locus",
            Family::Strategy => "strategy",
            Family::Ablation => "ablation",
            Family::FullPose => "full-pose",
            Family::Transfer => "transfer",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|f| f.name() == s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentSpec {
    pub name: String,
    pub train_task: String,
    pub eval_tasks: Vec<String>,
    /// Demonstration CSV; synthesized per task when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub demo: Option<PathBuf>,
    pub residual: ResidualKind,
    pub locus: ExplorationLocus,
    pub mode: ControlMode,
    /// Training reward; the preset's sparse indicator when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reward: Option<RewardSpec>,
    /// Train coupling-term and parameter-space learners on `exp(-L1)`
    /// instead of the shared reward.
    pub mirror_paper_rewards: bool,
    pub full_pose: bool,
    pub episodes: usize,
    /// Per-learner budgets keyed by residual name (`ppo`, `sac`), overriding
    /// `episodes` for that learner.
    #[serde(skip_serializing_if = "BTreeMap::is_empty")]
    pub learner_episodes: BTreeMap<String, usize>,
    /// Budget of the pure-RL row; three times `episodes` when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pure_rl_episodes: Option<usize>,
    pub eval_episodes: usize,
    pub deterministic_eval: bool,
    /// Start-offset bins for the binned evaluation; 0 disables it.
    pub bins: usize,
    pub bin_size: usize,
    pub seeds: Vec<u64>,
    pub transfer_task: String,
    pub transfer_updates: usize,
    /// Training success rate used for the episodes-to-reach column.
    pub success_target: f64,
    pub curve_window: usize,
    /// Worker threads; 0 uses the available parallelism.
    pub threads: usize,
    pub learner: LearnerConfig,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        Self {
            name: "experiment".into(),
            train_task: "easy".into(),
            eval_tasks: vec!["easy".into(), "hard".into()],
            demo: None,
            residual: ResidualKind::Ppo,
            locus: ExplorationLocus::TaskSpace,
            mode: ControlMode::Residual,
            reward: None,
            mirror_paper_rewards: true,
            full_pose: false,
            episodes: 2000,
            learner_episodes: BTreeMap::new(),
            pure_rl_episodes: None,
            eval_episodes: 200,
            deterministic_eval: true,
            bins: 0,
            bin_size: 20,
            seeds: vec![0, 1, 2],
            transfer_task: "hard".into(),
            transfer_updates: 3,
            success_target: 0.6,
            curve_window: 100,
            threads: 0,
            learner: LearnerConfig::default(),
        }
    }
}

impl ExperimentSpec {
    /// Defaults of one experiment family.
    pub fn for_family(family: Family) -> Self {
        let base = Self {
            name: family.name().to_string(),
            ..Self::default()
        };
        match family {
            Family::Locus | Family::Ablation | Family::Transfer => base,
            Family::Strategy => Self {
                episodes: 1000,
                learner_episodes: BTreeMap::from([("ppo".to_string(), 6000)]),
                ..base
            },
            Family::FullPose => Self {
                train_task: "peg".into(),
                eval_tasks: vec!["peg".into(), "gear".into(), "rj45".into()],
                full_pose: true,
                episodes: 3000,
                bins: 8,
                ..base
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if self.episodes == 0 {
            return bad("episode budget must be positive".into());
        }
        if self.seeds.is_empty() {
            return bad("at least one seed is required".into());
        }
        if self.eval_episodes == 0 || self.eval_tasks.is_empty() {
            return bad("evaluation needs tasks and a positive episode count".into());
        }
        for t in self.eval_tasks.iter().chain([&self.train_task, &self.transfer_task]) {
            if !PRESETS.contains(&t.as_str()) {
                return bad(format!("unknown task preset '{t}'"));
            }
        }
        for (k, &n) in &self.learner_episodes {
            if ResidualKind::parse(k).and_then(ResidualKind::learner).is_none() || n == 0 {
                return bad(format!("learner budget '{k} = {n}' needs a learner name and a positive count"));
            }
        }
        if self.bins > 0 && self.bin_size == 0 {
            return bad("bin size must be positive".into());
        }
        if !(0.0..=1.0).contains(&self.success_target) || self.curve_window == 0 {
            return bad("success target must lie in [0, 1] with a positive window".into());
        }
        if let Some(r) = &self.reward {
            r.validate()?;
        }
        check_consistency(self.residual, self.locus, self.mode)
    }

    /// Training budget of `residual`; zero for untrained residuals.
    pub fn budget(&self, residual: ResidualKind) -> usize {
        if residual.learner().is_none() {
            return 0;
        }
        self.learner_episodes.get(residual.name()).copied().unwrap_or(self.episodes)
    }

    fn reward_or_sparse(&self) -> RewardSpec {
        self.reward.unwrap_or(RewardSpec::sparse(KAPPA))
    }

    fn learner_residual(&self) -> ResidualKind {
        if self.residual.learner().is_some() {
            self.residual
        } else {
            ResidualKind::Ppo
        }
    }
}

fn check_consistency(residual: ResidualKind, locus: ExplorationLocus, mode: ControlMode) -> Result<()> {
    let ok = match residual {
        ResidualKind::None => locus == ExplorationLocus::None && mode == ControlMode::Residual,
        ResidualKind::Random | ResidualKind::Linear => {
            locus == ExplorationLocus::TaskSpace && mode == ControlMode::Residual
        }
        ResidualKind::Ppo | ResidualKind::Sac => {
            locus != ExplorationLocus::None && (mode == ControlMode::Residual || locus == ExplorationLocus::TaskSpace)
        }
    };
    if ok {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "residual '{}' cannot act through locus '{}' in {:?} mode",
            residual.name(),
            locus,
            mode
        )))
    }
}

/// Reads a TOML file (nested tables or dotted flat keys) over `base`.
pub fn load_spec(path: &Path, base: ExperimentSpec) -> Result<ExperimentSpec> {
    let text = fs::read_to_string(path)?;
    merge_spec(&text, base)
}

pub fn merge_spec(text: &str, base: ExperimentSpec) -> Result<ExperimentSpec> {
    let fmt = |e: &dyn std::fmt::Display| Error::Format(e.to_string());
    let overrides: toml::Table = toml::from_str(text).map_err(|e| fmt(&e))?;
    let mut merged = toml::Value::try_from(&base).map_err(|e| fmt(&e))?;
    merge_value(&mut merged, toml::Value::Table(overrides));
    let spec: ExperimentSpec = merged.try_into().map_err(|e: toml::de::Error| fmt(&e))?;
    spec.validate()?;
    Ok(spec)
}

fn merge_value(into: &mut toml::Value, from: toml::Value) {
    match (into, from) {
        (toml::Value::Table(a), toml::Value::Table(b)) => {
            for (k, v) in b {
                match a.get_mut(&k) {
                    Some(slot) if slot.is_table() && v.is_table() && k != "reward" => merge_value(slot, v),
                    _ => {
                        a.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

/// One trained or untrained policy configuration.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Condition {
    #[serde(skip)]
    pub label: String,
    pub translation: ResidualKind,
    /// Rotation residual; anything but `None` makes the action full-pose.
    pub rotation: ResidualKind,
    pub locus: ExplorationLocus,
    pub mode: ControlMode,
    pub reward: RewardSpec,
    pub train_task: String,
    #[serde(skip)]
    pub eval_tasks: Vec<String>,
    pub episodes: usize,
    pub max_updates: Option<usize>,
    /// Training continues from this condition's learner.
    pub fine_tune_from: Option<Box<Condition>>,
}

impl Condition {
    pub fn new(label: &str, residual: ResidualKind, locus: ExplorationLocus, spec: &ExperimentSpec) -> Self {
        Self {
            label: label.to_string(),
            translation: residual,
            rotation: ResidualKind::None,
            locus,
            mode: ControlMode::Residual,
            reward: spec.reward_or_sparse(),
            train_task: spec.train_task.clone(),
            eval_tasks: spec.eval_tasks.clone(),
            episodes: spec.budget(residual),
            max_updates: None,
            fine_tune_from: None,
        }
    }

    pub fn full_pose(&self) -> bool {
        self.rotation != ResidualKind::None
    }

    pub fn learner(&self) -> Option<LearnerKind> {
        self.translation.learner()
    }

    pub fn validate(&self) -> Result<()> {
        check_consistency(self.translation, self.locus, self.mode)?;
        let rotation_ok = match self.rotation {
            ResidualKind::None => true,
            ResidualKind::Random => !matches!(self.translation, ResidualKind::Ppo | ResidualKind::Sac),
            r => r == self.translation,
        };
        if !rotation_ok {
            return Err(Error::InvalidArgument(format!(
                "unsupported pairing {}/{}",
                self.translation.label(),
                self.rotation.label()
            )));
        }
        if self.learner().is_some() && self.episodes == 0 {
            return Err(Error::InvalidArgument(format!("condition '{}' has no training budget", self.label)));
        }
        Ok(())
    }

    fn settings(&self, config: &EnvConfig) -> RunnerSettings {
        let mut s = RunnerSettings::new(config, self.locus, self.mode);
        s.full_pose = self.full_pose();
        s
    }

    fn reward_name(&self) -> &'static str {
        if self.learner().is_some() {
            self.reward.name()
        } else {
            "n/a"
        }
    }
}

/// Preset configuration with the training reward applied.
pub fn task_config(task: &str, reward: RewardSpec) -> Result<EnvConfig> {
    let mut cfg = make_task(task)?;
    cfg.reward = match reward {
        RewardSpec::Sparse { .. } => RewardSpec::sparse(cfg.kappa),
        r => r,
    };
    cfg.validate()?;
    Ok(cfg)
}

/// A finished training run.
#[derive(Debug, Clone)]
pub struct Trained {
    pub learner: Option<Learner>,
    pub curve: Vec<CurveRow>,
    pub episodes: usize,
    pub updates: usize,
}

/// Shared state of a batch of experiments: fitted base policies and trained
/// learners, reused across families with identical training settings.
pub struct Session {
    demo: Option<Trajectory<f64>>,
    bases: Mutex<HashMap<String, Arc<BasePolicy>>>,
    trained: Mutex<HashMap<String, Arc<Trained>>>,
}

impl Session {
    pub fn new(demo: Option<&Path>) -> Result<Self> {
        let demo = match demo {
            Some(p) => Some(Trajectory::read_csv(fs::File::open(p)?)?),
            None => None,
        };
        Ok(Self {
            demo,
            bases: Mutex::new(HashMap::new()),
            trained: Mutex::new(HashMap::new()),
        })
    }

    pub fn base_policy(&self, config: &EnvConfig) -> Result<Arc<BasePolicy>> {
        if let Some(b) = self.bases.lock().unwrap().get(&config.name) {
            return Ok(b.clone());
        }
        let base = Arc::new(match &self.demo {
            Some(d) => fit_base_policy(d.clone())?,
            None => base_policy_for(config)?,
        });
        self.bases.lock().unwrap().insert(config.name.clone(), base.clone());
        Ok(base)
    }

    pub fn runner(&self, config: EnvConfig, settings: RunnerSettings) -> Result<EpisodeRunner> {
        let base = self.base_policy(&config)?;
        EpisodeRunner::new(config, (*base).clone(), settings)
    }

    /// Trains `cond` with `seed`, or returns the cached result.
    pub fn train_condition(&self, cond: &Condition, seed: u64, learner_cfg: &LearnerConfig) -> Result<Arc<Trained>> {
        let Some(kind) = cond.learner() else {
            return Ok(Arc::new(Trained {
                learner: None,
                curve: Vec::new(),
                episodes: 0,
                updates: 0,
            }));
        };
        let key = serde_json::to_string(&(cond, seed, learner_cfg))?;
        if let Some(t) = self.trained.lock().unwrap().get(&key) {
            return Ok(t.clone());
        }
        let config = task_config(&cond.train_task, cond.reward)?;
        let settings = cond.settings(&config);
        let runner = self.runner(config, settings.clone())?;
        let mut learner = match &cond.fine_tune_from {
            Some(src) => self
                .train_condition(src, seed, learner_cfg)?
                .learner
                .clone()
                .ok_or_else(|| Error::InvalidArgument("fine-tune source has no learner".into()))?,
            None => Learner::new(kind, settings.action_dim(), learner_cfg, seed)?,
        };
        log::info!("training '{}' on {} (seed {seed}, {} episodes)", cond.label, cond.train_task, cond.episodes);
        let log = train(&mut learner, &runner, cond.episodes, cond.max_updates, seed)?;
        let t = Arc::new(Trained {
            learner: Some(learner),
            curve: log.curve,
            episodes: log.episodes,
            updates: log.updates,
        });
        self.trained.lock().unwrap().insert(key, t.clone());
        Ok(t)
    }
}

fn make_actor<'a>(
    cond: &Condition,
    trained: &'a Trained,
    settings: &RunnerSettings,
    seed: u64,
    deterministic: bool,
) -> Box<dyn Actor + 'a> {
    let rng = rng_for(seed, 31);
    if let Some(l) = &trained.learner {
        return l.actor(rng, deterministic);
    }
    let bounds = settings.bounds.clone();
    match (cond.translation, cond.rotation) {
        (ResidualKind::Random, _) => Box::new(RandomActor {
            rng,
            full_pose: cond.full_pose(),
        }),
        (ResidualKind::Linear, ResidualKind::Random) => Box::new(SplitActor {
            translation: LinearActor::new(bounds),
            rotation: RandomActor { rng, full_pose: true },
        }),
        (ResidualKind::Linear, _) => Box::new(LinearActor::new(bounds)),
        _ => Box::new(ZeroActor(settings.action_dim())),
    }
}

/// Evaluation of one condition on one task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskEval {
    pub task: String,
    pub summary: EvalSummary,
}

/// Success count in one start-offset bin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinRow {
    pub condition: String,
    pub task: String,
    pub seed: u64,
    pub bin: usize,
    pub lower: f64,
    pub upper: f64,
    pub n: usize,
    pub successes: usize,
}

/// One condition trained and evaluated with one seed.
#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub condition: String,
    pub train_task: String,
    pub seed: u64,
    pub reward: String,
    /// Training episodes consumed; `None` for untrained conditions.
    pub eff: Option<usize>,
    pub updates: usize,
    pub episodes_to_reach: Option<usize>,
    pub evals: Vec<TaskEval>,
    pub bins: Vec<BinRow>,
    pub curve: Vec<CurveRow>,
}

/// Aggregate over seeds of one condition on one task. Rates are percent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub condition: String,
    pub task: String,
    pub reward: String,
    pub eff: Option<usize>,
    pub success: f64,
    /// Standard error over seeds; absent with fewer than two seeds.
    pub stderr: Option<f64>,
    pub per_seed: Vec<f64>,
    pub insertion_time: f64,
    pub peak_force: f64,
    pub mean_force: f64,
    /// Mean over seeds; absent unless every seed reached the target.
    pub episodes_to_reach: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ResultTable {
    pub experiment: String,
    pub seeds: Vec<u64>,
    pub rows: Vec<ResultRow>,
    pub runs: Vec<RunResult>,
}

impl ResultTable {
    pub fn row(&self, condition: &str, task: &str) -> Option<&ResultRow> {
        self.rows.iter().find(|r| r.condition == condition && r.task == task)
    }

    pub fn runs_of(&self, condition: &str) -> impl Iterator<Item = &RunResult> {
        let c = condition.to_string();
        self.runs.iter().filter(move |r| r.condition == c)
    }
}

/// Mean and standard error of the mean.
pub fn mean_stderr(xs: &[f64]) -> (f64, Option<f64>) {
    let n = xs.len();
    if n == 0 {
        return (f64::NAN, None);
    }
    let m = xs.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (m, None);
    }
    let var = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1) as f64;
    (m, Some((var / n as f64).sqrt()))
}

/// Offset of a start from the nominal start: orientation angle (deg) when
/// orientations are randomized, position distance (m) otherwise.
fn start_offset(state: &EnvState, config: &EnvConfig) -> (f64, f64) {
    let s = &config.start;
    if s.max_orientation > 0.0 {
        let a = state.orientation.geodesic_distance(&UnitQuaternion::identity());
        (a.to_degrees(), s.max_orientation.to_degrees())
    } else {
        ((state.position - s.center).norm(), s.radius * 3f64.sqrt())
    }
}

/// Draws `per_bin` starts into each of `bins` equal-width offset bins by
/// rejection sampling. Bins that stay short after the draw cap keep fewer.
pub fn stratified_starts(config: &EnvConfig, bins: usize, per_bin: usize, seed: u64) -> Vec<(usize, f64, f64, Vec<EnvState>)> {
    let mut rng = rng_for(seed, 202);
    let max = start_offset(&env_reset(config, &mut rng_for(seed, 203)), config).1;
    let width = max / bins as f64;
    let mut out: Vec<_> = (0..bins).map(|b| (b, b as f64 * width, (b + 1) as f64 * width, Vec::new())).collect();
    let cap = 1000 * bins * per_bin;
    let mut filled = 0;
    for _ in 0..cap {
        if filled == bins {
            break;
        }
        let st = env_reset(config, &mut rng);
        let (off, _) = start_offset(&st, config);
        let b = ((off / width) as usize).min(bins - 1);
        if out[b].3.len() < per_bin {
            out[b].3.push(st);
            if out[b].3.len() == per_bin {
                filled += 1;
            }
        }
    }
    out
}

fn run_job(session: &Session, spec: &ExperimentSpec, cond: &Condition, seed: u64) -> Result<RunResult> {
    cond.validate()?;
    let trained = session.train_condition(cond, seed, &spec.learner)?;
    let mut evals = Vec::new();
    let mut bins = Vec::new();
    for task in &cond.eval_tasks {
        let config = task_config(task, cond.reward)?;
        let settings = cond.settings(&config);
        let runner = session.runner(config, settings.clone())?;
        let mut actor = make_actor(cond, &trained, &settings, seed, spec.deterministic_eval);
        let outcomes = evaluate(&runner, actor.as_mut(), spec.eval_episodes, seed)?;
        evals.push(TaskEval {
            task: task.clone(),
            summary: summarize(&outcomes),
        });
        if spec.bins > 0 {
            for (b, lo, hi, starts) in stratified_starts(&runner.config, spec.bins, spec.bin_size, seed) {
                let mut actor = make_actor(cond, &trained, &settings, seed, spec.deterministic_eval);
                let mut successes = 0;
                for st in &starts {
                    successes += runner.run_from(st.clone(), actor.as_mut())?.record.success as usize;
                }
                bins.push(BinRow {
                    condition: cond.label.clone(),
                    task: task.clone(),
                    seed,
                    bin: b,
                    lower: lo,
                    upper: hi,
                    n: starts.len(),
                    successes,
                });
            }
        }
    }
    Ok(RunResult {
        condition: cond.label.clone(),
        train_task: cond.train_task.clone(),
        seed,
        reward: cond.reward_name().to_string(),
        eff: cond.learner().map(|_| trained.episodes),
        updates: trained.updates,
        episodes_to_reach: episodes_to_reach(&trained.curve, spec.success_target, spec.curve_window),
        evals,
        bins,
        curve: trained.curve.clone(),
    })
}

/// Trains and evaluates every condition with every seed on worker threads,
/// then reduces the results in condition-major, seed-minor order.
pub fn run_conditions(session: &Session, spec: &ExperimentSpec, conditions: &[Condition]) -> Result<ResultTable> {
    spec.validate()?;
    for c in conditions {
        c.validate()?;
    }
    let jobs: Vec<(usize, u64)> = (0..conditions.len()).flat_map(|c| spec.seeds.iter().map(move |&s| (c, s))).collect();
    let slots: Vec<Mutex<Option<Result<RunResult>>>> = jobs.iter().map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    let threads = match spec.threads {
        0 => std::thread::available_parallelism().map_or(1, |n| n.get()),
        n => n,
    }
    .min(jobs.len().max(1));
    std::thread::scope(|scope| {
        for _ in 0..threads {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some(&(c, seed)) = jobs.get(i) else { break };
                let r = run_job(session, spec, &conditions[c], seed);
                *slots[i].lock().unwrap() = Some(r);
            });
        }
    });
    let mut runs = Vec::with_capacity(jobs.len());
    for s in slots {
        runs.push(s.into_inner().unwrap().expect("every job ran")?);
    }
    let mut rows = Vec::new();
    for cond in conditions {
        let these: Vec<&RunResult> = runs
            .iter()
            .filter(|r| r.condition == cond.label && r.train_task == cond.train_task)
            .collect();
        let mut tasks: Vec<String> = cond.eval_tasks.clone();
        if tasks.len() > 1 {
            tasks.push("average".into());
        }
        for task in &tasks {
            let pick = |r: &RunResult| -> Vec<EvalSummary> {
                r.evals
                    .iter()
                    .filter(|e| task == "average" || &e.task == task)
                    .map(|e| e.summary.clone())
                    .collect()
            };
            let per_task: Vec<Vec<EvalSummary>> = these.iter().map(|r| pick(r)).collect();
            let avg = |f: &dyn Fn(&EvalSummary) -> f64, s: &[EvalSummary]| s.iter().map(f).sum::<f64>() / s.len() as f64;
            let per_seed: Vec<f64> = per_task.iter().map(|s| 100.0 * avg(&|e| e.success_rate, s)).collect();
            let over_seeds = |f: &dyn Fn(&EvalSummary) -> f64| {
                per_task.iter().map(|s| avg(f, s)).sum::<f64>() / per_task.len() as f64
            };
            let (success, stderr) = mean_stderr(&per_seed);
            let reach: Option<Vec<f64>> = these.iter().map(|r| r.episodes_to_reach.map(|e| e as f64)).collect();
            rows.push(ResultRow {
                condition: cond.label.clone(),
                task: task.clone(),
                reward: cond.reward_name().to_string(),
                eff: these.first().and_then(|r| r.eff),
                success,
                stderr,
                per_seed,
                insertion_time: over_seeds(&|e| e.mean_insertion_time),
                peak_force: over_seeds(&|e| e.mean_peak_force),
                mean_force: over_seeds(&|e| e.mean_force),
                episodes_to_reach: reach.filter(|v| !v.is_empty()).map(|v| v.iter().sum::<f64>() / v.len() as f64),
            });
        }
    }
    Ok(ResultTable {
        experiment: spec.name.clone(),
        seeds: spec.seeds.clone(),
        rows,
        runs,
    })
}

/// The single condition built from this experiment's own residual, locus and mode.
pub fn spec_condition(spec: &ExperimentSpec) -> Condition {
    let mut c = Condition::new(spec.residual.label(), spec.residual, spec.locus, spec);
    c.mode = spec.mode;
    if spec.full_pose && spec.locus == ExplorationLocus::TaskSpace && spec.residual != ResidualKind::None {
        c.rotation = spec.residual;
    }
    c
}

pub fn locus_conditions(spec: &ExperimentSpec) -> Vec<Condition> {
    let learner = spec.learner_residual();
    [
        ("None", ExplorationLocus::None),
        ("CouplingTerm", ExplorationLocus::CouplingTerm),
        ("ParameterSpace", ExplorationLocus::ParameterSpace),
        ("TaskSpace", ExplorationLocus::TaskSpace),
    ]
    .into_iter()
    .map(|(label, locus)| {
        let kind = if locus == ExplorationLocus::None { ResidualKind::None } else { learner };
        let mut c = Condition::new(label, kind, locus, spec);
        if spec.mirror_paper_rewards && matches!(locus, ExplorationLocus::CouplingTerm | ExplorationLocus::ParameterSpace) {
            c.reward = RewardSpec::ExpL1;
        }
        c
    })
    .collect()
}

/// One learner per exploration locus, trained on the train task and
/// evaluated on every eval task.
pub fn run_locus_comparison(session: &Session, spec: &ExperimentSpec) -> Result<ResultTable> {
    run_conditions(session, spec, &locus_conditions(spec))
}

pub fn strategy_conditions(spec: &ExperimentSpec) -> Vec<Condition> {
    [ResidualKind::Random, ResidualKind::Linear, ResidualKind::Sac, ResidualKind::Ppo]
        .into_iter()
        .map(|k| Condition::new(k.label(), k, ExplorationLocus::TaskSpace, spec))
        .collect()
}

/// Random, linear and nonlinear task-space residuals under the same gate.
pub fn run_strategy_comparison(session: &Session, spec: &ExperimentSpec) -> Result<ResultTable> {
    run_conditions(session, spec, &strategy_conditions(spec))
}

pub fn ablation_conditions(spec: &ExperimentSpec) -> Vec<Condition> {
    let learner = spec.learner_residual();
    let dmp = Condition::new("DMP", ResidualKind::None, ExplorationLocus::None, spec);
    let rlfd = Condition::new("rLfD", learner, ExplorationLocus::TaskSpace, spec);
    let pure = Condition {
        label: "PureRL".into(),
        mode: ControlMode::PureRl,
        reward: RewardSpec::dense_default(),
        episodes: spec.pure_rl_episodes.unwrap_or(3 * rlfd.episodes),
        ..rlfd.clone()
    };
    let hybrid = Condition {
        label: "Hybrid".into(),
        mode: ControlMode::Hybrid,
        ..rlfd.clone()
    };
    vec![dmp, pure, hybrid, rlfd]
}

/// Bare primitive, pure RL on the dense reward, hybrid switching and the
/// residual on the primitive.
pub fn run_ablation(session: &Session, spec: &ExperimentSpec) -> Result<ResultTable> {
    run_conditions(session, spec, &ablation_conditions(spec))
}

pub fn fullpose_conditions(spec: &ExperimentSpec) -> Vec<Condition> {
    use ResidualKind::*;
    let learner = spec.learner_residual();
    let pairs = [(None, None), (Linear, None), (learner, None), (Linear, Random), (Random, Random), (learner, learner)];
    let mut out = Vec::new();
    for task in &spec.eval_tasks {
        for (t, r) in pairs {
            let locus = if t == None { ExplorationLocus::None } else { ExplorationLocus::TaskSpace };
            let task_spec = ExperimentSpec {
                train_task: task.clone(),
                eval_tasks: vec![task.clone()],
                ..spec.clone()
            };
            let mut c = Condition::new(&format!("{}/{}", t.label(), r.label()), t, locus, &task_spec);
            c.rotation = r;
            out.push(c);
        }
    }
    out
}

/// Translation-only against full-pose residuals on each physical task,
/// with success per start-offset bin.
pub fn run_fullpose_comparison(session: &Session, spec: &ExperimentSpec) -> Result<ResultTable> {
    run_conditions(session, spec, &fullpose_conditions(spec))
}

pub fn transfer_conditions(spec: &ExperimentSpec) -> Vec<Condition> {
    let learner = spec.learner_residual();
    let target = &spec.transfer_task;
    let k = spec.transfer_updates;
    let source = Condition::new("source", learner, ExplorationLocus::TaskSpace, spec);
    let on_target = |label: &str| {
        let mut c = source.clone();
        c.label = label.to_string();
        c.train_task = target.clone();
        c.eval_tasks = vec![target.clone()];
        c
    };
    let full = on_target("target");
    let src = Condition {
        label: "source->target (0 updates)".into(),
        eval_tasks: vec![target.clone()],
        ..source.clone()
    };
    let scratch = Condition {
        max_updates: Some(k),
        ..on_target(&format!("scratch ({k} updates)"))
    };
    let tuned = Condition {
        max_updates: Some(k),
        fine_tune_from: Some(Box::new(source.clone())),
        ..on_target(&format!("source->target ({k} updates)"))
    };
    vec![full, src, scratch, tuned]
}

/// Source policy fine-tuned on the target for a few updates, against the
/// same number of updates from scratch and a full target budget.
pub fn run_transfer(session: &Session, spec: &ExperimentSpec) -> Result<ResultTable> {
    run_conditions(session, spec, &transfer_conditions(spec))
}

pub fn run_family(session: &Session, family: Family, spec: &ExperimentSpec) -> Result<ResultTable> {
    match family {
        Family::Locus => run_locus_comparison(session, spec),
        Family::Strategy => run_strategy_comparison(session, spec),
        Family::Ablation => run_ablation(session, spec),
        Family::FullPose => run_fullpose_comparison(session, spec),
        Family::Transfer => run_transfer(session, spec),
    }
}

fn f(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.4}")
    } else {
        String::new()
    }
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn slug(s: &str) -> String {
    let mut out = String::new();
    for c in s.chars() {
        if c.is_ascii_alphanumeric() {
            out.push(c.to_ascii_lowercase());
        } else if !out.ends_with('-') {
            out.push('-');
        }
    }
    out.trim_matches('-').to_string()
}

fn write_csv(path: &Path, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    for r in rows {
        w.write_record(&r)?;
    }
    w.flush()?;
    Ok(())
}

/// Writes per-seed, summary, bin and curve CSVs for every table plus a
/// combined `report.md`. Returns the written paths in a fixed order.
pub fn emit_outputs(tables: &[ResultTable], out_dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(out_dir)?;
    let mut written = Vec::new();
    for t in tables {
        let exp = slug(&t.experiment);
        for &seed in &t.seeds {
            let path = out_dir.join(format!("{exp}_{seed}.csv"));
            let rows = t.runs.iter().filter(|r| r.seed == seed).flat_map(|r| {
                r.evals.iter().map(move |e| {
                    vec![
                        r.condition.clone(),
                        e.task.clone(),
                        r.reward.clone(),
                        opt(r.eff),
                        r.updates.to_string(),
                        f(100.0 * e.summary.success_rate),
                        f(e.summary.mean_insertion_time),
                        f(e.summary.mean_peak_force),
                        f(e.summary.mean_force),
                        e.summary.broken.to_string(),
                        opt(r.episodes_to_reach),
                    ]
                })
            });
            write_csv(
                &path,
                &[
                    "condition",
                    "task",
                    "reward",
                    "eff",
                    "updates",
                    "success",
                    "insertion_time",
                    "peak_force",
                    "mean_force",
                    "broken",
                    "episodes_to_reach",
                ],
                rows,
            )?;
            written.push(path);
        }
        let path = out_dir.join(format!("{exp}_summary.csv"));
        write_csv(
            &path,
            &[
                "condition",
                "task",
                "reward",
                "eff",
                "success",
                "stderr",
                "per_seed",
                "insertion_time",
                "peak_force",
                "mean_force",
                "episodes_to_reach",
            ],
            t.rows.iter().map(|r| {
                vec![
                    r.condition.clone(),
                    r.task.clone(),
                    r.reward.clone(),
                    opt(r.eff),
                    f(r.success),
                    r.stderr.map(f).unwrap_or_default(),
                    r.per_seed.iter().map(|v| f(*v)).collect::<Vec<_>>().join(";"),
                    f(r.insertion_time),
                    f(r.peak_force),
                    f(r.mean_force),
                    r.episodes_to_reach.map(f).unwrap_or_default(),
                ]
            }),
        )?;
        written.push(path);
        if t.runs.iter().any(|r| !r.bins.is_empty()) {
            for &seed in &t.seeds {
                let path = out_dir.join(format!("{exp}_bins_{seed}.csv"));
                let rows = t.runs.iter().filter(|r| r.seed == seed).flat_map(|r| r.bins.iter()).map(|b| {
                    vec![
                        b.condition.clone(),
                        b.task.clone(),
                        b.bin.to_string(),
                        f(b.lower),
                        f(b.upper),
                        b.n.to_string(),
                        b.successes.to_string(),
                    ]
                });
                write_csv(&path, &["condition", "task", "bin", "lower", "upper", "n", "successes"], rows)?;
                written.push(path);
            }
        }
        for r in t.runs.iter().filter(|r| !r.curve.is_empty()) {
            let path = out_dir.join(format!("{exp}_curve_{}_{}_{}.csv", slug(&r.condition), slug(&r.train_task), r.seed));
            write_training_curve(&path, &r.curve)?;
            written.push(path);
        }
    }
    let path = out_dir.join("report.md");
    fs::write(&path, render_report(tables))?;
    written.push(path);
    Ok(written)
}

/// Markdown tables, one per experiment; empty inputs render "no data" rows.
pub fn render_report(tables: &[ResultTable]) -> String {
    let mut s = String::from("# Results\n");
    let header = "| Condition | Task | Success (%) | ± s.e. | Eff. | Reward | Ins. time (s) | Peak force (N) | Mean force (N) |\n|---|---|---|---|---|---|---|---|---|\n";
    if tables.is_empty() {
        s.push_str("\n");
        s.push_str(header);
        s.push_str("| no data | | | | | | | | |\n");
        return s;
    }
    for t in tables {
        let _ = write!(s, "\n## {}\n\nSeeds: {:?}\n\n", t.experiment, t.seeds);
        s.push_str(header);
        if t.rows.is_empty() {
            s.push_str("| no data | | | | | | | | |\n");
        }
        for r in &t.rows {
            let _ = writeln!(
                s,
                "| {} | {} | {:.1} | {} | {} | {} | {:.2} | {:.2} | {:.2} |",
                r.condition,
                r.task,
                r.success,
                r.stderr.map(|e| format!("{e:.1}")).unwrap_or_else(|| "n/a".into()),
                r.eff.map(|e| e.to_string()).unwrap_or_else(|| "n/a".into()),
                r.reward,
                r.insertion_time,
                r.peak_force,
                r.mean_force,
            );
        }
    }
    s
}
