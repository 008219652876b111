use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::nn::{clip_grad_norm, Activation, Adam, Mlp};
use super::policy::{gaussian_log_prob, gaussian_log_prob_grad, squashed_log_prob, PolicySample, TanhGaussianPolicy};
use super::record::EpisodeRecord;
use crate::error::{invalid, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PpoConfig {
    pub clip: f64,
    pub epochs: usize,
    pub minibatch_size: usize,
    /// Episodes collected per update.
    pub batch_episodes: usize,
    pub learning_rate: f64,
    pub value_learning_rate: f64,
    pub discount: f64,
    pub gae_lambda: f64,
    pub max_grad_norm: f64,
    pub hidden: Vec<usize>,
    pub init_log_std: f64,
}

impl Default for PpoConfig {
    fn default() -> Self {
        Self {
            clip: 0.2,
            epochs: 10,
            minibatch_size: 256,
            batch_episodes: 20,
            learning_rate: 3e-4,
            value_learning_rate: 1e-3,
            discount: 0.99,
            gae_lambda: 0.95,
            max_grad_norm: 0.5,
            hidden: vec![64, 64],
            init_log_std: -0.5,
        }
    }
}

impl PpoConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.clip > 0.0 && self.clip < 1.0) {
            return Err(invalid("clip must lie in (0, 1)"));
        }
        if !(self.discount > 0.0 && self.discount <= 1.0) {
            return Err(invalid("discount must lie in (0, 1]"));
        }
        if !(0.0..=1.0).contains(&self.gae_lambda) {
            return Err(invalid("GAE lambda must lie in [0, 1]"));
        }
        if self.epochs == 0 || self.minibatch_size == 0 || self.batch_episodes == 0 {
            return Err(invalid("epochs, minibatch and batch sizes must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PpoDiagnostics {
    pub samples: usize,
    pub policy_loss: f64,
    pub value_loss: f64,
    pub approx_kl: f64,
    pub clip_fraction: f64,
    pub aborted: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ppo {
    pub policy: TanhGaussianPolicy,
    pub value: Mlp,
    pub config: PpoConfig,
    policy_opt: Adam,
    value_opt: Adam,
}

/// One training sample for the surrogate.
#[derive(Debug, Clone, PartialEq)]
pub struct SurrogateSample {
    pub obs: Vec<f64>,
    pub u: Vec<f64>,
    pub old_log_prob: f64,
    pub advantage: f64,
}

/// `min(r A, clip(r, 1-eps, 1+eps) A)` and its derivative in `r`.
pub fn clipped_surrogate(ratio: f64, advantage: f64, clip: f64) -> (f64, f64) {
    let unclipped = ratio * advantage;
    let clipped = ratio.clamp(1.0 - clip, 1.0 + clip) * advantage;
    if unclipped <= clipped {
        (unclipped, advantage)
    } else {
        // Only reachable with the ratio outside the band, pushed further out.
        (clipped, 0.0)
    }
}

/// Generalized advantage estimates and value targets for one episode that
/// terminates after its last reward.
pub fn gae(rewards: &[f64], values: &[f64], discount: f64, lambda: f64) -> (Vec<f64>, Vec<f64>) {
    let n = rewards.len();
    let mut adv = vec![0.0; n];
    let mut acc = 0.0;
    for t in (0..n).rev() {
        let next_v = if t + 1 < n { values[t + 1] } else { 0.0 };
        let delta = rewards[t] + discount * next_v - values[t];
        acc = delta + discount * lambda * acc;
        adv[t] = acc;
    }
    let targets = adv.iter().zip(values).map(|(a, v)| a + v).collect();
    (adv, targets)
}

/// Negative mean clipped surrogate over `samples` and its gradient with
/// respect to the policy parameters.
pub fn surrogate_loss_and_grad(policy: &TanhGaussianPolicy, samples: &[SurrogateSample], clip: f64) -> (f64, Vec<f64>) {
    let mut grad = vec![0.0; policy.net.n_params()];
    let mut loss = 0.0;
    let inv_n = 1.0 / samples.len().max(1) as f64;
    for s in samples {
        let acts = policy.net.forward_cached(&s.obs);
        let head = policy.head_from_output(acts.last().unwrap());
        let lp = squashed_log_prob(&s.u, &head.mean, &head.log_std);
        let ratio = (lp - s.old_log_prob).exp();
        let (obj, d_ratio) = clipped_surrogate(ratio, s.advantage, clip);
        loss -= obj * inv_n;
        let d_lp = -d_ratio * ratio * inv_n;
        if d_lp == 0.0 {
            continue;
        }
        let (dm, ds) = gaussian_log_prob_grad(&s.u, &head);
        let dout: Vec<f64> = dm.iter().chain(&ds).map(|g| g * d_lp).collect();
        policy.net.backward(&acts, &dout, &mut grad);
    }
    (loss, grad)
}

/// Mean `0.5 (V(s) - target)^2` and its gradient.
pub fn value_loss_and_grad(value: &Mlp, obs: &[Vec<f64>], targets: &[f64]) -> (f64, Vec<f64>) {
    let mut grad = vec![0.0; value.n_params()];
    let mut loss = 0.0;
    let inv_n = 1.0 / obs.len().max(1) as f64;
    for (o, y) in obs.iter().zip(targets) {
        let acts = value.forward_cached(o);
        let err = acts.last().unwrap()[0] - y;
        loss += 0.5 * err * err * inv_n;
        value.backward(&acts, &[err * inv_n], &mut grad);
    }
    (loss, grad)
}

impl Ppo {
    pub fn new<R: Rng + ?Sized>(obs_dim: usize, action_dim: usize, config: PpoConfig, rng: &mut R) -> Result<Self> {
        config.validate()?;
        let policy = TanhGaussianPolicy::new(obs_dim, &config.hidden, action_dim, Activation::Tanh, config.init_log_std, rng);
        let mut sizes = vec![obs_dim];
        sizes.extend_from_slice(&config.hidden);
        sizes.push(1);
        let value = Mlp::new(&sizes, Activation::Tanh, rng);
        Ok(Self {
            policy_opt: Adam::new(policy.net.n_params(), config.learning_rate),
            value_opt: Adam::new(value.n_params(), config.value_learning_rate),
            policy,
            value,
            config,
        })
    }

    pub fn act<R: Rng + ?Sized>(&self, obs: &[f64], rng: &mut R) -> (PolicySample, f64) {
        (self.policy.sample(obs, rng), self.value.forward(obs)[0])
    }

    pub fn value_of(&self, obs: &[f64]) -> f64 {
        self.value.forward(obs)[0]
    }

    pub fn update<R: Rng + ?Sized>(&mut self, batch: &[EpisodeRecord], rng: &mut R) -> Result<PpoDiagnostics> {
        if batch.iter().all(EpisodeRecord::is_empty) {
            return Err(invalid("PPO batch holds no decisions"));
        }
        if !batch.iter().all(EpisodeRecord::is_aligned) {
            return Err(invalid("episode record fields are not aligned"));
        }
        let mut samples = Vec::new();
        let mut targets = Vec::new();
        for ep in batch {
            let (adv, tgt) = gae(&ep.rewards, &ep.values, self.config.discount, self.config.gae_lambda);
            for t in 0..ep.len() {
                samples.push(SurrogateSample {
                    obs: ep.observations[t].clone(),
                    u: ep.actions[t].clone(),
                    old_log_prob: ep.log_probs[t],
                    advantage: adv[t],
                });
            }
            targets.extend(tgt);
        }
        normalize_advantages(&mut samples);

        let n = samples.len();
        let mut diag = PpoDiagnostics { samples: n, ..Default::default() };
        let mut order: Vec<usize> = (0..n).collect();
        let mb = self.config.minibatch_size.min(n);
        let mut count = 0.0;
        for _ in 0..self.config.epochs {
            order.shuffle(rng);
            for chunk in order.chunks(mb) {
                let s: Vec<SurrogateSample> = chunk.iter().map(|&i| samples[i].clone()).collect();
                let (pl, mut pg) = surrogate_loss_and_grad(&self.policy, &s, self.config.clip);
                let obs: Vec<Vec<f64>> = s.iter().map(|x| x.obs.clone()).collect();
                let tg: Vec<f64> = chunk.iter().map(|&i| targets[i]).collect();
                let (vl, mut vg) = value_loss_and_grad(&self.value, &obs, &tg);
                if !pl.is_finite() || !vl.is_finite() || pg.iter().chain(&vg).any(|g| !g.is_finite()) {
                    log::warn!("non-finite PPO gradient, update aborted");
                    diag.aborted = true;
                    return Ok(diag);
                }
                clip_grad_norm(&mut pg, self.config.max_grad_norm);
                clip_grad_norm(&mut vg, self.config.max_grad_norm);
                self.policy_opt.step(&mut self.policy.net.params, &pg);
                self.value_opt.step(&mut self.value.params, &vg);
                diag.policy_loss += pl;
                diag.value_loss += vl;
                count += 1.0;
            }
        }
        diag.policy_loss /= count;
        diag.value_loss /= count;
        let (kl, clipped) = self.ratio_stats(&samples);
        diag.approx_kl = kl;
        diag.clip_fraction = clipped;
        Ok(diag)
    }

    fn ratio_stats(&self, samples: &[SurrogateSample]) -> (f64, f64) {
        let mut kl = 0.0;
        let mut clipped = 0.0;
        for s in samples {
            let h = self.policy.head(&s.obs);
            let lp = gaussian_log_prob(&s.u, &h.mean, &h.log_std) - super::policy::squash_log_jacobian(&s.u);
            let log_ratio = lp - s.old_log_prob;
            kl += log_ratio.exp() - 1.0 - log_ratio;
            if (log_ratio.exp() - 1.0).abs() > self.config.clip {
                clipped += 1.0;
            }
        }
        let n = samples.len().max(1) as f64;
        (kl / n, clipped / n)
    }
}

fn normalize_advantages(samples: &mut [SurrogateSample]) {
    let n = samples.len() as f64;
    let mean = samples.iter().map(|s| s.advantage).sum::<f64>() / n;
    let var = samples.iter().map(|s| (s.advantage - mean).powi(2)).sum::<f64>() / n;
    let std = var.sqrt();
    for s in samples.iter_mut() {
        s.advantage = if std > 1e-8 { (s.advantage - mean) / std } else { 0.0 };
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clip_zeroes_gradient_outside_band() {
        assert_eq!(clipped_surrogate(1.5, 1.0, 0.2), (1.2, 0.0));
        assert_eq!(clipped_surrogate(0.5, -1.0, 0.2).1, 0.0);
        // pulled back toward the band: gradient survives
        assert_eq!(clipped_surrogate(1.5, -1.0, 0.2).1, -1.0);
        assert_eq!(clipped_surrogate(0.5, 1.0, 0.2).1, 1.0);
        assert_eq!(clipped_surrogate(1.0, 2.0, 0.2), (2.0, 2.0));
    }

    #[test]
    fn gae_with_unit_lambda_is_discounted_return_minus_value() {
        let r = [0.0, 0.0, 1.0];
        let v = [0.2, 0.3, 0.4];
        let (adv, tgt) = gae(&r, &v, 0.9, 1.0);
        assert!((tgt[0] - 0.81).abs() < 1e-12);
        assert!((adv[0] - 0.61).abs() < 1e-12);
        assert!((tgt[2] - 1.0).abs() < 1e-12);
    }
}
