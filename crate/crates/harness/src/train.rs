use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use rlfd_core::env::measure_insertion_time;
use rlfd_core::learn::{CurveRow, Mlp, Ppo, PpoConfig, Sac, SacConfig, Transition};
use rlfd_core::residual::FEATURE_DIM;
use rlfd_core::{Error, Result};

use crate::runner::{rng_for, Actor, EpisodeOutcome, EpisodeRunner, PpoActor, SacActor};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LearnerKind {
    Ppo,
    Sac,
}

#[derive(Debug, Clone)]
pub enum Learner {
    Ppo(Ppo),
    Sac(Sac),
}

impl Learner {
    pub fn new(kind: LearnerKind, action_dim: usize, cfg: &LearnerConfig, seed: u64) -> Result<Self> {
        let mut rng = rng_for(seed, 7);
        Ok(match kind {
            LearnerKind::Ppo => Learner::Ppo(Ppo::new(FEATURE_DIM, action_dim, cfg.ppo.clone(), &mut rng)?),
            LearnerKind::Sac => Learner::Sac(Sac::new(FEATURE_DIM, action_dim, cfg.sac.clone(), &mut rng)?),
        })
    }

    pub fn kind(&self) -> LearnerKind {
        match self {
            Learner::Ppo(_) => LearnerKind::Ppo,
            Learner::Sac(_) => LearnerKind::Sac,
        }
    }

    /// Networks in checkpoint order.
    pub fn networks(&self) -> Vec<(&'static str, &Mlp)> {
        match self {
            Learner::Ppo(p) => vec![("policy", &p.policy.net), ("value", &p.value)],
            Learner::Sac(s) => vec![
                ("policy", &s.policy.net),
                ("q1", &s.q1),
                ("q2", &s.q2),
                ("q1_target", &s.q1_target),
                ("q2_target", &s.q2_target),
            ],
        }
    }

    /// Replaces the networks with loaded ones, matched by name and shape.
    pub fn load_networks(&mut self, nets: Vec<(String, Mlp)>) -> Result<()> {
        for (name, net) in nets {
            let slot = match (&mut *self, name.as_str()) {
                (Learner::Ppo(p), "policy") => &mut p.policy.net,
                (Learner::Ppo(p), "value") => &mut p.value,
                (Learner::Sac(s), "policy") => &mut s.policy.net,
                (Learner::Sac(s), "q1") => &mut s.q1,
                (Learner::Sac(s), "q2") => &mut s.q2,
                (Learner::Sac(s), "q1_target") => &mut s.q1_target,
                (Learner::Sac(s), "q2_target") => &mut s.q2_target,
                _ => return Err(Error::Format(format!("unexpected network '{name}'"))),
            };
            if slot.sizes != net.sizes {
                return Err(Error::Format(format!("network '{name}' has shape {:?}, expected {:?}", net.sizes, slot.sizes)));
            }
            *slot = net;
        }
        Ok(())
    }

    pub fn actor(&self, rng: ChaCha8Rng, deterministic: bool) -> Box<dyn Actor + '_> {
        match self {
            Learner::Ppo(p) => Box::new(PpoActor { ppo: p, rng, deterministic }),
            Learner::Sac(s) => Box::new(SacActor { sac: s, rng, deterministic }),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LearnerConfig {
    pub ppo: PpoConfig,
    pub sac: SacConfig,
}

/// Training history of one run.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainLog {
    pub curve: Vec<CurveRow>,
    pub updates: usize,
    pub episodes: usize,
}

impl TrainLog {
    /// First episode index at which the trailing `window` success rate
    /// reaches `target`.
    pub fn episodes_to_reach(&self, target: f64, window: usize) -> Option<usize> {
        episodes_to_reach(&self.curve, target, window)
    }
}

/// First episode count at which the trailing `window` success rate of
/// `curve` reaches `target`.
pub fn episodes_to_reach(curve: &[CurveRow], target: f64, window: usize) -> Option<usize> {
    let w = window.max(1);
    let mut sum = 0usize;
    for (i, row) in curve.iter().enumerate() {
        sum += row.success as usize;
        if i >= w {
            sum -= curve[i - w].success as usize;
        }
        if i + 1 >= w && sum as f64 / w as f64 >= target {
            return Some(i + 1);
        }
    }
    None
}

fn curve_row(i: usize, o: &EpisodeOutcome) -> CurveRow {
    CurveRow {
        episode: i,
        ret: o.record.total_reward(),
        success: o.record.success as u8,
        peak_force: o.record.peak_force,
    }
}

/// Trains for `episodes` episodes. PPO updates after every full batch, or
/// stops after `max_updates` updates when given; SAC updates after every
/// episode once the replay holds a batch.
pub fn train(
    learner: &mut Learner,
    runner: &EpisodeRunner,
    episodes: usize,
    max_updates: Option<usize>,
    seed: u64,
) -> Result<TrainLog> {
    let mut env_rng = rng_for(seed, 1);
    let mut act_rng = rng_for(seed, 2);
    let mut upd_rng = rng_for(seed, 3);
    let mut log = TrainLog::default();
    let limit_reached = |log: &TrainLog| max_updates.is_some_and(|m| log.updates >= m);
    match learner {
        Learner::Ppo(ppo) => {
            let batch_size = ppo.config.batch_episodes;
            let mut batch = Vec::with_capacity(batch_size);
            while log.episodes < episodes && !limit_reached(&log) {
                let mut actor = PpoActor {
                    ppo,
                    rng: child(&mut act_rng),
                    deterministic: false,
                };
                let o = runner.run(&mut actor, &mut env_rng)?;
                log.curve.push(curve_row(log.episodes, &o));
                log.episodes += 1;
                batch.push(o.record);
                if batch.len() == batch_size {
                    if batch.iter().any(|r| !r.is_empty()) {
                        let d = ppo.update(&batch, &mut upd_rng)?;
                        log::debug!("ppo update {}: {:?}", log.updates, d);
                    }
                    log.updates += 1;
                    batch.clear();
                }
            }
        }
        Learner::Sac(sac) => {
            while log.episodes < episodes && !limit_reached(&log) {
                let mut actor = SacActor {
                    sac,
                    rng: child(&mut act_rng),
                    deterministic: false,
                };
                let o = runner.run(&mut actor, &mut env_rng)?;
                log.curve.push(curve_row(log.episodes, &o));
                log.episodes += 1;
                push_transitions(sac, &o);
                if sac.replay.len() >= sac.config.batch_size {
                    sac.update(&mut upd_rng)?;
                    log.updates += 1;
                }
            }
        }
    }
    Ok(log)
}

fn child(rng: &mut ChaCha8Rng) -> ChaCha8Rng {
    use rand::{Rng, SeedableRng};
    ChaCha8Rng::seed_from_u64(rng.gen())
}

fn push_transitions(sac: &mut Sac, o: &EpisodeOutcome) {
    let r = &o.record;
    let n = r.len();
    for t in 0..n {
        let last = t + 1 == n;
        sac.observe(Transition {
            obs: r.observations[t].clone(),
            action: o.units[t].clone(),
            reward: r.rewards[t],
            next_obs: if last { r.final_observation.clone() } else { r.observations[t + 1].clone() },
            done: last,
        });
    }
}

/// Aggregate of an evaluation run.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EvalSummary {
    pub episodes: usize,
    pub success_rate: f64,
    pub mean_peak_force: f64,
    pub mean_force: f64,
    pub mean_insertion_time: f64,
    pub broken: usize,
}

pub fn summarize(outcomes: &[EpisodeOutcome]) -> EvalSummary {
    let n = outcomes.len().max(1) as f64;
    EvalSummary {
        episodes: outcomes.len(),
        success_rate: outcomes.iter().filter(|o| o.record.success).count() as f64 / n,
        mean_peak_force: outcomes.iter().map(|o| o.record.peak_force).sum::<f64>() / n,
        mean_force: outcomes.iter().map(|o| o.record.mean_force).sum::<f64>() / n,
        mean_insertion_time: outcomes.iter().map(|o| measure_insertion_time(&o.record)).sum::<f64>() / n,
        broken: outcomes.iter().filter(|o| o.broken).count(),
    }
}

/// Runs `n` evaluation episodes on a dedicated RNG stream.
pub fn evaluate(runner: &EpisodeRunner, actor: &mut dyn Actor, n: usize, seed: u64) -> Result<Vec<EpisodeOutcome>> {
    let mut env_rng = rng_for(seed, 101);
    (0..n).map(|_| runner.run(actor, &mut env_rng)).collect()
}
