use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::nn::{clip_grad_norm, Activation, Adam, Mlp};
use super::policy::{squashed_log_prob, PolicySample, TanhGaussianPolicy};
use crate::error::{invalid, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SacConfig {
    pub replay_capacity: usize,
    pub batch_size: usize,
    pub discount: f64,
    /// Soft target update rate.
    pub tau: f64,
    pub learning_rate: f64,
    pub updates_per_iteration: usize,
    /// Defaults to `-action_dim` when unset.
    pub target_entropy: Option<f64>,
    pub init_temperature: f64,
    pub hidden: Vec<usize>,
    pub max_grad_norm: f64,
}

impl Default for SacConfig {
    fn default() -> Self {
        Self {
            replay_capacity: 100_000,
            batch_size: 64,
            discount: 0.99,
            tau: 0.005,
            learning_rate: 3e-4,
            updates_per_iteration: 32,
            target_entropy: None,
            init_temperature: 0.1,
            hidden: vec![64, 64],
            max_grad_norm: 10.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub obs: Vec<f64>,
    /// Squashed action in the unit box.
    pub action: Vec<f64>,
    pub reward: f64,
    pub next_obs: Vec<f64>,
    pub done: bool,
}

/// Fixed-capacity ring buffer.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ReplayBuffer {
    capacity: usize,
    items: Vec<Transition>,
    next: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        Self {
            capacity: capacity.max(1),
            items: Vec::new(),
            next: 0,
        }
    }

    pub fn push(&mut self, t: Transition) {
        if self.items.len() < self.capacity {
            self.items.push(t);
        } else {
            self.items[self.next] = t;
        }
        self.next = (self.next + 1) % self.capacity;
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn get(&self, i: usize) -> &Transition {
        &self.items[i]
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SacDiagnostics {
    pub updates: usize,
    pub critic_loss: f64,
    pub actor_loss: f64,
    pub temperature: f64,
    pub aborted: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sac {
    pub policy: TanhGaussianPolicy,
    pub q1: Mlp,
    pub q2: Mlp,
    pub q1_target: Mlp,
    pub q2_target: Mlp,
    pub log_alpha: f64,
    pub config: SacConfig,
    pub replay: ReplayBuffer,
    policy_opt: Adam,
    q1_opt: Adam,
    q2_opt: Adam,
    alpha_opt: Adam,
}

/// Mean `0.5 (Q(s, a) - y)^2` over a batch and its parameter gradient.
pub fn critic_loss_and_grad(q: &Mlp, inputs: &[Vec<f64>], targets: &[f64]) -> (f64, Vec<f64>) {
    let mut grad = vec![0.0; q.n_params()];
    let mut loss = 0.0;
    let inv_n = 1.0 / inputs.len().max(1) as f64;
    for (x, y) in inputs.iter().zip(targets) {
        let acts = q.forward_cached(x);
        let err = acts.last().unwrap()[0] - y;
        loss += 0.5 * err * err * inv_n;
        q.backward(&acts, &[err * inv_n], &mut grad);
    }
    (loss, grad)
}

fn concat(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut v = Vec::with_capacity(a.len() + b.len());
    v.extend_from_slice(a);
    v.extend_from_slice(b);
    v
}

impl Sac {
    pub fn new<R: Rng + ?Sized>(obs_dim: usize, action_dim: usize, config: SacConfig, rng: &mut R) -> Result<Self> {
        if !(config.tau > 0.0 && config.tau <= 1.0) || config.batch_size == 0 {
            return Err(invalid("SAC needs tau in (0, 1] and a positive batch size"));
        }
        if !(config.discount > 0.0 && config.discount <= 1.0) || !(config.init_temperature > 0.0) {
            return Err(invalid("SAC discount must lie in (0, 1] and temperature be positive"));
        }
        let policy = TanhGaussianPolicy::new(obs_dim, &config.hidden, action_dim, Activation::Relu, -1.0, rng);
        let mut sizes = vec![obs_dim + action_dim];
        sizes.extend_from_slice(&config.hidden);
        sizes.push(1);
        let q1 = Mlp::new(&sizes, Activation::Relu, rng);
        let q2 = Mlp::new(&sizes, Activation::Relu, rng);
        let lr = config.learning_rate;
        Ok(Self {
            policy_opt: Adam::new(policy.net.n_params(), lr),
            q1_opt: Adam::new(q1.n_params(), lr),
            q2_opt: Adam::new(q2.n_params(), lr),
            alpha_opt: Adam::new(1, lr),
            q1_target: q1.clone(),
            q2_target: q2.clone(),
            policy,
            q1,
            q2,
            log_alpha: config.init_temperature.ln(),
            replay: ReplayBuffer::new(config.replay_capacity),
            config,
        })
    }

    pub fn target_entropy(&self) -> f64 {
        self.config.target_entropy.unwrap_or(-(self.policy.action_dim as f64))
    }

    pub fn act<R: Rng + ?Sized>(&self, obs: &[f64], rng: &mut R) -> PolicySample {
        self.policy.sample(obs, rng)
    }

    pub fn observe(&mut self, t: Transition) {
        self.replay.push(t);
    }

    /// Runs exactly `updates_per_iteration` gradient steps.
    pub fn update<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<SacDiagnostics> {
        if self.replay.len() < self.config.batch_size {
            return Err(invalid(format!(
                "replay holds {} transitions, batch needs {}",
                self.replay.len(),
                self.config.batch_size
            )));
        }
        let mut diag = SacDiagnostics::default();
        for _ in 0..self.config.updates_per_iteration {
            if !self.gradient_step(rng, &mut diag) {
                diag.aborted = true;
                log::warn!("non-finite SAC gradient, update aborted");
                break;
            }
            diag.updates += 1;
        }
        if diag.updates > 0 {
            diag.critic_loss /= diag.updates as f64;
            diag.actor_loss /= diag.updates as f64;
        }
        diag.temperature = self.log_alpha.exp();
        Ok(diag)
    }

    fn gradient_step<R: Rng + ?Sized>(&mut self, rng: &mut R, diag: &mut SacDiagnostics) -> bool {
        let n = self.config.batch_size;
        let idx: Vec<usize> = (0..n).map(|_| rng.gen_range(0..self.replay.len())).collect();
        let alpha = self.log_alpha.exp();
        let d = self.policy.action_dim;

        // Critic targets.
        let mut inputs = Vec::with_capacity(n);
        let mut targets = Vec::with_capacity(n);
        for &i in &idx {
            let t = self.replay.get(i);
            let mut y = t.reward;
            if !t.done {
                let next = self.policy.sample(&t.next_obs, rng);
                let x = concat(&t.next_obs, &next.action);
                let q = self.q1_target.forward(&x)[0].min(self.q2_target.forward(&x)[0]);
                y += self.config.discount * (q - alpha * next.log_prob);
            }
            inputs.push(concat(&t.obs, &t.action));
            targets.push(y);
        }
        let (l1, mut g1) = critic_loss_and_grad(&self.q1, &inputs, &targets);
        let (l2, mut g2) = critic_loss_and_grad(&self.q2, &inputs, &targets);

        // Actor through the reparameterized sample.
        let mut pg = vec![0.0; self.policy.net.n_params()];
        let mut actor_loss = 0.0;
        let mut mean_log_prob = 0.0;
        let mut scratch = vec![0.0; self.q1.n_params()];
        let inv_n = 1.0 / n as f64;
        for &i in &idx {
            let obs = &self.replay.get(i).obs;
            let acts = self.policy.net.forward_cached(obs);
            let head = self.policy.head_from_output(acts.last().unwrap());
            let xi: Vec<f64> = (0..d).map(|_| StandardNormal.sample(rng)).collect();
            let sigma: Vec<f64> = head.log_std.iter().map(|l| l.exp()).collect();
            let u: Vec<f64> = (0..d).map(|k| head.mean[k] + sigma[k] * xi[k]).collect();
            let a: Vec<f64> = u.iter().map(|v| v.tanh()).collect();
            let lp = squashed_log_prob(&u, &head.mean, &head.log_std);
            let x = concat(obs, &a);
            let c1 = self.q1.forward_cached(&x);
            let c2 = self.q2.forward_cached(&x);
            let (q, net, cache) = if c1.last().unwrap()[0] <= c2.last().unwrap()[0] {
                (c1.last().unwrap()[0], &self.q1, &c1)
            } else {
                (c2.last().unwrap()[0], &self.q2, &c2)
            };
            let dx = net.backward(cache, &[1.0], &mut scratch);
            let dq_da = &dx[obs.len()..];
            actor_loss += (alpha * lp - q) * inv_n;
            mean_log_prob += lp * inv_n;
            let mut dout = vec![0.0; 2 * d];
            for k in 0..d {
                let da_du = 1.0 - a[k] * a[k];
                let dj_du = alpha * 2.0 * a[k] - dq_da[k] * da_du;
                dout[k] = dj_du * inv_n;
                if head.log_std_free[k] {
                    dout[d + k] = (-alpha + dj_du * sigma[k] * xi[k]) * inv_n;
                }
            }
            self.policy.net.backward(&acts, &dout, &mut pg);
        }
        let alpha_grad = -(mean_log_prob + self.target_entropy());

        let finite = l1.is_finite()
            && l2.is_finite()
            && actor_loss.is_finite()
            && alpha_grad.is_finite()
            && g1.iter().chain(&g2).chain(&pg).all(|g| g.is_finite());
        if !finite {
            return false;
        }
        let m = self.config.max_grad_norm;
        clip_grad_norm(&mut g1, m);
        clip_grad_norm(&mut g2, m);
        clip_grad_norm(&mut pg, m);
        self.q1_opt.step(&mut self.q1.params, &g1);
        self.q2_opt.step(&mut self.q2.params, &g2);
        self.policy_opt.step(&mut self.policy.net.params, &pg);
        let mut la = [self.log_alpha];
        self.alpha_opt.step(&mut la, &[alpha_grad]);
        self.log_alpha = la[0].clamp(-10.0, 2.0);
        self.q1_target.soft_update_from(&self.q1, self.config.tau);
        self.q2_target.soft_update_from(&self.q2, self.config.tau);
        diag.critic_loss += 0.5 * (l1 + l2);
        diag.actor_loss += actor_loss;
        true
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn ring_buffer_overwrites_oldest() {
        let mut rb = ReplayBuffer::new(2);
        for r in 0..3 {
            rb.push(Transition { obs: vec![], action: vec![], reward: r as f64, next_obs: vec![], done: true });
        }
        assert_eq!(rb.len(), 2);
        assert_eq!(rb.get(0).reward, 2.0);
    }

    #[test]
    fn refuses_small_replay() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut sac = Sac::new(1, 1, SacConfig::default(), &mut rng).unwrap();
        assert!(sac.update(&mut rng).is_err());
    }

    #[test]
    fn default_runs_32_updates() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut sac = Sac::new(1, 1, SacConfig::default(), &mut rng).unwrap();
        for _ in 0..64 {
            sac.observe(Transition { obs: vec![0.0], action: vec![0.1], reward: 0.0, next_obs: vec![0.0], done: true });
        }
        assert_eq!(sac.update(&mut rng).unwrap().updates, 32);
    }
}
