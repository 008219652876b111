use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use rlfd_core::dmp::{dmp_step_with_forcing, forcing_term, CanonicalState, DmpState};
use rlfd_core::env::{env_reset, env_step, insertion_distance, observe, Command, EnvConfig, EnvState};
use rlfd_core::learn::{atanh_clamped, EpisodeRecord, Ppo, Sac};
use rlfd_core::orientation::{
    apply_orientation_residual, quat_compose, quat_log, AngleAxisResidual, OrientationState, UnitQuaternion,
};
use rlfd_core::residual::{
    goal_directed_target, linear_policy_act, linear_policy_update, random_policy, residual_schedule,
    ActionBounds, ExplorationLocus, LinearPolicyState, Observation, ResidualAction,
};
use rlfd_core::{Error, Result, Vec3};

use crate::demo::BasePolicy;

/// How the policy output is combined with the primitive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ControlMode {
    /// Primitive plus residual.
    Residual,
    /// No primitive; the policy drives the set-point from the start.
    PureRl,
    /// Primitive until the gate, then the policy alone.
    Hybrid,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunnerSettings {
    pub locus: ExplorationLocus,
    pub mode: ControlMode,
    pub bounds: ActionBounds,
    /// Scale of coupling-term and parameter-space actions.
    pub injection_bound: f64,
    pub gate_fraction: f64,
    /// Environment steps per policy decision.
    pub decision_interval: usize,
    /// Primitive integration steps per environment step.
    pub substeps: usize,
    pub position_gain: f64,
    pub rotation_gain: f64,
    pub full_pose: bool,
}

impl RunnerSettings {
    pub fn new(config: &EnvConfig, locus: ExplorationLocus, mode: ControlMode) -> Self {
        let sim = rlfd_core::env::is_sim_preset(&config.name);
        Self {
            locus,
            mode,
            bounds: ActionBounds {
                translation: match (mode, sim) {
                    (ControlMode::PureRl, _) => PURE_RL_SPEED,
                    (_, true) => SIM_RESIDUAL_SPEED,
                    (_, false) => PHYSICAL_RESIDUAL_SPEED,
                },
                alpha: ROTATION_BOUND,
            },
            injection_bound: INJECTION_BOUND,
            gate_fraction: match mode {
                ControlMode::PureRl => 0.0,
                _ => config.default_gate_fraction(),
            },
            decision_interval: 10,
            substeps: 10,
            position_gain: 5.0,
            rotation_gain: 5.0,
            full_pose: false,
        }
    }

    pub fn action_dim(&self) -> usize {
        if self.full_pose && matches!(self.locus, ExplorationLocus::TaskSpace) {
            rlfd_core::residual::FULL_POSE_DIM
        } else {
            rlfd_core::residual::TRANSLATION_DIM
        }
    }
}

/// Residual speed limit on the simulation presets (m/s).
pub const SIM_RESIDUAL_SPEED: f64 = 0.02;
/// Residual speed limit on the physical-analog presets (m/s).
pub const PHYSICAL_RESIDUAL_SPEED: f64 = 0.005;
/// Speed limit of a policy driving the set-point alone (m/s).
pub const PURE_RL_SPEED: f64 = 0.1;
/// Residual rotation per decision (rad).
pub const ROTATION_BOUND: f64 = 0.03;
/// Bound of coupling and weight-noise actions (forcing units).
pub const INJECTION_BOUND: f64 = 4.0;

/// One policy decision in the unit box.
#[derive(Debug, Clone, PartialEq)]
pub struct Decision {
    pub unit: Vec<f64>,
    /// Pre-squash value, `atanh(unit)` for non-stochastic actors.
    pub u: Vec<f64>,
    pub log_prob: f64,
    pub value: f64,
}

impl Decision {
    pub fn deterministic(unit: Vec<f64>) -> Self {
        Self {
            u: unit.iter().map(|&a| atanh_clamped(a)).collect(),
            unit,
            log_prob: 0.0,
            value: 0.0,
        }
    }
}

pub trait Actor {
    fn decide(&mut self, obs: &Observation, features: &[f64]) -> Decision;
}

/// Always zero.
pub struct ZeroActor(pub usize);

impl Actor for ZeroActor {
    fn decide(&mut self, _: &Observation, _: &[f64]) -> Decision {
        Decision::deterministic(vec![0.0; self.0])
    }
}

/// Uniform random residual.
pub struct RandomActor {
    pub rng: ChaCha8Rng,
    pub full_pose: bool,
}

impl Actor for RandomActor {
    fn decide(&mut self, _: &Observation, _: &[f64]) -> Decision {
        let unit_bounds = ActionBounds { translation: 1.0, alpha: 1.0 };
        let a = random_policy(&mut self.rng, &unit_bounds, self.full_pose);
        Decision::deterministic(a.to_unit(&unit_bounds, self.full_pose))
    }
}

/// Recursive least-squares policy updated online toward the goal-directed
/// velocity.
pub struct LinearActor {
    pub state: LinearPolicyState,
    pub bounds: ActionBounds,
    pub gain: f64,
}

/// Gain of the goal-directed regression target (1/s).
pub const LINEAR_TARGET_GAIN: f64 = 0.5;

impl LinearActor {
    pub fn new(bounds: ActionBounds) -> Self {
        Self {
            state: LinearPolicyState::for_observations(1.0, 1e3).expect("valid RLS settings"),
            bounds,
            gain: LINEAR_TARGET_GAIN,
        }
    }
}

impl Actor for LinearActor {
    fn decide(&mut self, obs: &Observation, _: &[f64]) -> Decision {
        let target = goal_directed_target(obs, self.gain, &self.bounds);
        if let Err(e) = linear_policy_update(&mut self.state, obs, &target) {
            log::warn!("linear policy update skipped: {e}");
        }
        let a = linear_policy_act(&self.state, obs, &self.bounds);
        let b = self.bounds.translation.max(f64::MIN_POSITIVE);
        Decision::deterministic(a.d_translation.0.iter().map(|v| v / b).collect())
    }
}

/// Translation from one actor, rotation from another.
pub struct SplitActor<A, B> {
    pub translation: A,
    pub rotation: B,
}

impl<A: Actor, B: Actor> Actor for SplitActor<A, B> {
    fn decide(&mut self, obs: &Observation, features: &[f64]) -> Decision {
        let t = self.translation.decide(obs, features);
        let r = self.rotation.decide(obs, features);
        let mut unit = t.unit[..3].to_vec();
        unit.extend_from_slice(&r.unit[3..]);
        Decision::deterministic(unit)
    }
}

pub struct PpoActor<'a> {
    pub ppo: &'a Ppo,
    pub rng: ChaCha8Rng,
    pub deterministic: bool,
}

impl Actor for PpoActor<'_> {
    fn decide(&mut self, _: &Observation, features: &[f64]) -> Decision {
        if self.deterministic {
            return Decision::deterministic(self.ppo.policy.deterministic(features));
        }
        let (s, value) = self.ppo.act(features, &mut self.rng);
        Decision {
            unit: s.action,
            u: s.u,
            log_prob: s.log_prob,
            value,
        }
    }
}

pub struct SacActor<'a> {
    pub sac: &'a Sac,
    pub rng: ChaCha8Rng,
    pub deterministic: bool,
}

impl Actor for SacActor<'_> {
    fn decide(&mut self, _: &Observation, features: &[f64]) -> Decision {
        if self.deterministic {
            return Decision::deterministic(self.sac.policy.deterministic(features));
        }
        let s = self.sac.act(features, &mut self.rng);
        Decision {
            unit: s.action,
            u: s.u,
            log_prob: s.log_prob,
            value: 0.0,
        }
    }
}

/// Result of one episode.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeOutcome {
    pub record: EpisodeRecord,
    /// Squashed actions aligned with the record.
    pub units: Vec<Vec<f64>>,
    /// Whether the last decision ended the episode by success or breakage.
    pub terminal: bool,
    pub start: Vec3<f64>,
    /// Magnitude of the latent grasp yaw (rad).
    pub grasp_yaw: f64,
    pub final_l2: f64,
    pub broken: bool,
}

/// Phase, forcing and angular forcing tabulated along the primitive.
struct Tabulated {
    phase: Vec<f64>,
    forcing: Vec<Vec<f64>>,
    rotation_forcing: Vec<Vec3<f64>>,
}

fn tabulate(base: &BasePolicy, n: usize, dt: f64) -> Result<Tabulated> {
    let mut c = base.translation.canonical()?;
    let mut t = Tabulated {
        phase: Vec::with_capacity(n),
        forcing: Vec::with_capacity(n),
        rotation_forcing: Vec::with_capacity(n),
    };
    for _ in 0..n {
        t.phase.push(c.s);
        t.forcing.push(forcing_term(c.s, &base.translation)?);
        t.rotation_forcing.push(base.rotation.forcing(c.s)?);
        c = rlfd_core::dmp::canonical_step(&c, dt)?;
    }
    Ok(t)
}

/// Runs the primitive with residual corrections on the environment.
pub struct EpisodeRunner {
    pub config: EnvConfig,
    pub base: BasePolicy,
    pub settings: RunnerSettings,
    table: Tabulated,
}

impl EpisodeRunner {
    pub fn new(config: EnvConfig, base: BasePolicy, settings: RunnerSettings) -> Result<Self> {
        config.validate()?;
        if settings.decision_interval == 0 || settings.substeps == 0 {
            return Err(Error::InvalidArgument("decision interval and substeps must be positive".into()));
        }
        if !(0.0..=1.0).contains(&settings.gate_fraction) {
            return Err(Error::InvalidArgument("gate fraction must lie in [0, 1]".into()));
        }
        let n = (config.steps() + 1) * settings.substeps;
        let table = tabulate(&base, n, config.dt / settings.substeps as f64)?;
        Ok(Self {
            config,
            base,
            settings,
            table,
        })
    }

    fn decisions_active(&self, step: usize, t: f64) -> bool {
        let s = &self.settings;
        match (s.mode, s.locus) {
            (ControlMode::PureRl, _) => true,
            (ControlMode::Hybrid, _) => residual_schedule(t, self.config.episode_length, s.gate_fraction) > 0.0,
            (_, ExplorationLocus::None) => false,
            (_, ExplorationLocus::ParameterSpace) => step == 0,
            (_, ExplorationLocus::CouplingTerm) => true,
            (_, ExplorationLocus::TaskSpace) => residual_schedule(t, self.config.episode_length, s.gate_fraction) > 0.0,
        }
    }

    pub fn run(&self, actor: &mut dyn Actor, env_rng: &mut ChaCha8Rng) -> Result<EpisodeOutcome> {
        let start_state = env_reset(&self.config, env_rng);
        self.run_from(start_state, actor)
    }

    pub fn run_from(&self, mut state: EnvState, actor: &mut dyn Actor) -> Result<EpisodeOutcome> {
        let cfg = &self.config;
        let set = &self.settings;
        let sub = set.substeps;
        let dmp_dt = cfg.dt / sub as f64;
        let dofs = 3;
        let start = state.position;
        let grasp_yaw = state.grasp.twist_about_z().abs();

        let mut plan = DmpState {
            x: start.to_vec(),
            v: vec![0.0; dofs],
            s: CanonicalState::new(self.base.translation.alpha_s, self.base.translation.tau)?,
        };
        let mut rot = OrientationState {
            q: state.orientation,
            eta: Vec3::zeros(),
            s: CanonicalState::new(self.base.rotation.alpha_s, self.base.rotation.tau)?,
        };
        let mut offset = Vec3::zeros();
        let mut rot_offset = UnitQuaternion::identity();
        let mut residual = ResidualAction::zero();
        let mut coupling = vec![0.0; dofs];
        let mut weight_shift = vec![0.0; dofs];
        // Hybrid and pure-RL modes drive a free set-point.
        let mut free_sp: Option<(Vec3<f64>, UnitQuaternion<f64>)> = match set.mode {
            ControlMode::PureRl => Some((start, state.orientation)),
            _ => None,
        };

        let mut rec = EpisodeRecord {
            env_dt: cfg.dt,
            episode_length: cfg.episode_length,
            ..Default::default()
        };
        let mut units = Vec::new();
        let mut block_reward = 0.0;
        let mut block_steps = 0usize;
        let mut recording = false;
        let mut terminal = false;
        let per_step = cfg.reward.is_per_step();
        let close_block = |rec: &mut EpisodeRecord, sum: f64, n: usize| {
            let r = if per_step { sum / n.max(1) as f64 } else { sum };
            rec.rewards.push(r);
        };

        let steps = cfg.steps();
        for step in 0..steps {
            let t = step as f64 * cfg.dt;
            let k0 = step * sub;
            let phase = self.table.phase[k0];
            if step % set.decision_interval == 0 && self.decisions_active(step, t) {
                if recording {
                    close_block(&mut rec, block_reward, block_steps);
                }
                block_reward = 0.0;
                block_steps = 0;
                let obs = observe(&state, cfg, phase);
                let features = obs.features();
                let d = actor.decide(&obs, &features);
                if set.mode == ControlMode::Hybrid && free_sp.is_none() {
                    free_sp = Some((state.position, state.orientation));
                }
                match (set.mode, set.locus) {
                    (ControlMode::Residual, ExplorationLocus::ParameterSpace) => {
                        weight_shift = d.unit[..dofs].iter().map(|u| u * set.injection_bound).collect();
                    }
                    (ControlMode::Residual, ExplorationLocus::CouplingTerm) => {
                        coupling = d.unit[..dofs].iter().map(|u| u * set.injection_bound).collect();
                    }
                    _ => {
                        residual = ResidualAction::from_unit(&d.unit, &set.bounds);
                    }
                }
                rec.observations.push(features);
                rec.actions.push(d.u);
                rec.log_probs.push(d.log_prob);
                rec.values.push(d.value);
                units.push(d.unit);
                recording = true;
            }

            // Primitive at the integration rate.
            let mut v_plan = Vec3::zeros();
            if free_sp.is_none() {
                for j in 0..sub {
                    let k = k0 + j;
                    let s = self.table.phase[k];
                    let mut f = self.table.forcing[k].clone();
                    // Broadcast weight noise adds s * eta (activations sum to one).
                    for (fd, w) in f.iter_mut().zip(&weight_shift) {
                        *fd += s * w;
                    }
                    let c: Vec<f64> = coupling.iter().map(|c| s * c).collect();
                    plan = dmp_step_with_forcing(&plan, &self.base.translation, dmp_dt, &f, Some(&c))?;
                    let acc = self.base.rotation.acceleration_with_forcing(&rot, &self.table.rotation_forcing[k], None)?;
                    let q = quat_compose(&rlfd_core::orientation::quat_exp(&rot.eta.scale(dmp_dt)), &rot.q)?;
                    rot = OrientationState {
                        q,
                        eta: rot.eta + acc.scale(dmp_dt),
                        s: rlfd_core::dmp::canonical_step(&rot.s, dmp_dt)?,
                    };
                }
                v_plan = Vec3::from_slice(&plan.v);
            }

            let residual_on = matches!(set.locus, ExplorationLocus::TaskSpace) || set.mode != ControlMode::Residual;
            let gate = if residual_on && recording { 1.0 } else { 0.0 };
            let r = residual.gated(gate).per_substep(set.decision_interval);
            let step_rot = if r.alpha != 0.0 {
                apply_orientation_residual(&UnitQuaternion::identity(), &AngleAxisResidual { alpha: r.alpha, r: r.axis })?
            } else {
                UnitQuaternion::identity()
            };
            let v_res = r.d_translation;

            let (x_sp, q_sp, v_ff, w_ff) = match free_sp.as_mut() {
                Some((p, q)) => {
                    *p = *p + v_res.scale(cfg.dt);
                    *q = quat_compose(&step_rot, q)?;
                    (*p, *q, v_res, Vec3::zeros())
                }
                None => {
                    offset = offset + v_res.scale(cfg.dt);
                    rot_offset = quat_compose(&step_rot, &rot_offset)?;
                    (
                        Vec3::from_slice(&plan.x) + offset,
                        quat_compose(&rot_offset, &rot.q)?,
                        v_plan + v_res,
                        rot.eta,
                    )
                }
            };
            let cmd = Command {
                velocity: v_ff + (x_sp - state.position).scale(set.position_gain),
                angular_velocity: w_ff + quat_log(&quat_compose(&q_sp, &state.orientation.conjugate())?).scale(set.rotation_gain),
            };
            let res = env_step(&state, &cmd, cfg)?;
            state = res.state;
            rec.force_trace.push(res.info.force_magnitude);
            block_reward += res.reward;
            block_steps += 1;
            if res.info.success && rec.success_step.is_none() {
                rec.success_step = Some(step + 1);
            }
            if res.done {
                terminal = res.info.success || res.info.broken;
                break;
            }
        }
        if recording {
            close_block(&mut rec, block_reward, block_steps);
        }
        let phase_end = self.table.phase[(rec.force_trace.len() * sub).min(self.table.phase.len() - 1)];
        rec.final_observation = observe(&state, cfg, phase_end).features();
        rec.success = state.success && !state.broken;
        let stats = rlfd_core::env::force_stats(&rec.force_trace, cfg.dt);
        rec.peak_force = stats.peak;
        rec.mean_force = stats.mean;
        let (_, l2) = insertion_distance(&state, cfg);
        Ok(EpisodeOutcome {
            record: rec,
            units,
            terminal,
            start,
            grasp_yaw,
            final_l2: l2,
            broken: state.broken,
        })
    }
}

/// Independent generator for stream `stream` of `seed`.
pub fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    use rand::SeedableRng;
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

/// Uniform integer draw used to derive child seeds.
pub fn child_seed(rng: &mut ChaCha8Rng) -> u64 {
    rng.gen()
}
