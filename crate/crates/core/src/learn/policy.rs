use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::nn::{Activation, Mlp};

pub const LOG_STD_MIN: f64 = -5.0;
pub const LOG_STD_MAX: f64 = 2.0;
const LN_2PI: f64 = 1.837_877_066_409_345_3;

/// Gaussian policy squashed through tanh. The network emits the mean
/// followed by the log-std for every action dimension; actions live in the
/// unit box and are scaled to physical bounds by the caller.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TanhGaussianPolicy {
    pub net: Mlp,
    pub action_dim: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolicySample {
    /// Pre-squash sample.
    pub u: Vec<f64>,
    /// `tanh(u)`, in `(-1, 1)`.
    pub action: Vec<f64>,
    /// Log density of `action` in the unit box.
    pub log_prob: f64,
}

/// Mean and clamped log-std for one observation.
#[derive(Debug, Clone, PartialEq)]
pub struct Head {
    pub mean: Vec<f64>,
    pub log_std: Vec<f64>,
    /// False where the raw log-std was clamped (no gradient flows there).
    pub log_std_free: Vec<bool>,
}

impl TanhGaussianPolicy {
    pub fn new<R: Rng + ?Sized>(
        obs_dim: usize,
        hidden: &[usize],
        action_dim: usize,
        activation: Activation,
        init_log_std: f64,
        rng: &mut R,
    ) -> Self {
        let mut sizes = vec![obs_dim];
        sizes.extend_from_slice(hidden);
        sizes.push(2 * action_dim);
        let mut net = Mlp::new(&sizes, activation, rng);
        net.scale_output_layer(0.01);
        for i in 0..action_dim {
            net.set_output_bias(action_dim + i, init_log_std);
        }
        Self { net, action_dim }
    }

    pub fn head_from_output(&self, out: &[f64]) -> Head {
        let d = self.action_dim;
        let raw = &out[d..2 * d];
        Head {
            mean: out[..d].to_vec(),
            log_std: raw.iter().map(|v| v.clamp(LOG_STD_MIN, LOG_STD_MAX)).collect(),
            log_std_free: raw.iter().map(|v| (LOG_STD_MIN..=LOG_STD_MAX).contains(v)).collect(),
        }
    }

    pub fn head(&self, obs: &[f64]) -> Head {
        self.head_from_output(&self.net.forward(obs))
    }

    pub fn sample<R: Rng + ?Sized>(&self, obs: &[f64], rng: &mut R) -> PolicySample {
        let h = self.head(obs);
        let u: Vec<f64> = h
            .mean
            .iter()
            .zip(&h.log_std)
            .map(|(m, ls)| {
                let xi: f64 = StandardNormal.sample(rng);
                m + ls.exp() * xi
            })
            .collect();
        let log_prob = squashed_log_prob(&u, &h.mean, &h.log_std);
        PolicySample {
            action: u.iter().map(|v| v.tanh()).collect(),
            u,
            log_prob,
        }
    }

    /// `tanh(mean)`.
    pub fn deterministic(&self, obs: &[f64]) -> Vec<f64> {
        self.head(obs).mean.iter().map(|m| m.tanh()).collect()
    }
}

/// `sum_i log(1 - tanh(u_i)^2)`, computed without cancellation.
pub fn squash_log_jacobian(u: &[f64]) -> f64 {
    u.iter()
        .map(|&x| 2.0 * (std::f64::consts::LN_2 - x - softplus(-2.0 * x)))
        .sum()
}

pub fn softplus(x: f64) -> f64 {
    if x > 30.0 {
        x
    } else {
        x.exp().ln_1p()
    }
}

/// Diagonal Gaussian log density of `u`.
pub fn gaussian_log_prob(u: &[f64], mean: &[f64], log_std: &[f64]) -> f64 {
    u.iter()
        .zip(mean)
        .zip(log_std)
        .map(|((x, m), ls)| {
            let z = (x - m) / ls.exp();
            -0.5 * z * z - ls - 0.5 * LN_2PI
        })
        .sum()
}

/// Density of `tanh(u)` in the unit box.
pub fn squashed_log_prob(u: &[f64], mean: &[f64], log_std: &[f64]) -> f64 {
    gaussian_log_prob(u, mean, log_std) - squash_log_jacobian(u)
}

/// Gradient of [`gaussian_log_prob`] with respect to mean and log-std, for
/// fixed `u`. The squash term does not depend on the head.
pub fn gaussian_log_prob_grad(u: &[f64], head: &Head) -> (Vec<f64>, Vec<f64>) {
    let mut dm = Vec::with_capacity(u.len());
    let mut ds = Vec::with_capacity(u.len());
    for i in 0..u.len() {
        let var = (2.0 * head.log_std[i]).exp();
        let diff = u[i] - head.mean[i];
        dm.push(diff / var);
        ds.push(if head.log_std_free[i] { diff * diff / var - 1.0 } else { 0.0 });
    }
    (dm, ds)
}

/// Inverse of tanh with the argument pulled inside the open unit interval.
pub fn atanh_clamped(a: f64) -> f64 {
    let lim = 1.0 - 1e-6;
    a.clamp(-lim, lim).atanh()
}
