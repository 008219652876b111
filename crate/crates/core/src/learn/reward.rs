use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

pub const DENSE_ALPHA: f64 = 10.0;
pub const DENSE_BETA: f64 = 0.002;
pub const DENSE_EPSILON: f64 = 1e-4;
/// Lowest value the guarded dense reward returns.
pub const DENSE_FLOOR: f64 = -100.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum RewardSpec {
    /// `1[L2 <= kappa]`, granted at episode end.
    Sparse { kappa: f64 },
    /// `-(alpha L1 + beta / (L2 - epsilon))` every decision step.
    Dense { alpha: f64, beta: f64, epsilon: f64 },
    /// `exp(-L1)` at episode end.
    ExpL1,
}

impl RewardSpec {
    pub fn sparse(kappa: f64) -> Self {
        RewardSpec::Sparse { kappa }
    }

    pub fn dense_default() -> Self {
        RewardSpec::Dense {
            alpha: DENSE_ALPHA,
            beta: DENSE_BETA,
            epsilon: DENSE_EPSILON,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            RewardSpec::Sparse { kappa } if !(kappa > 0.0) => Err(invalid("kappa must be positive")),
            RewardSpec::Dense { alpha, beta, epsilon }
                if !(beta > 0.0 && epsilon > 0.0 && alpha.is_finite()) =>
            {
                Err(invalid("dense reward needs beta > 0 and epsilon > 0"))
            }
            _ => Ok(()),
        }
    }

    /// Whether the reward is paid on every decision step rather than once.
    pub fn is_per_step(&self) -> bool {
        matches!(self, RewardSpec::Dense { .. })
    }

    pub fn name(&self) -> &'static str {
        match self {
            RewardSpec::Sparse { .. } => "sparse",
            RewardSpec::Dense { .. } => "dense",
            RewardSpec::ExpL1 => "exp-l1",
        }
    }

    /// Reward for distances `l1`, `l2` to the full-insertion pose.
    pub fn evaluate(&self, l1: f64, l2: f64) -> f64 {
        match *self {
            RewardSpec::Sparse { kappa } => sparse_reward(l2, kappa),
            RewardSpec::Dense { alpha, beta, epsilon } => dense_reward_guarded(l1, l2, alpha, beta, epsilon, DENSE_FLOOR),
            RewardSpec::ExpL1 => (-l1).exp(),
        }
    }
}

/// `sum_t gamma^t r_t`.
pub fn compute_return(rewards: &[f64], discount: f64) -> f64 {
    rewards.iter().rev().fold(0.0, |acc, r| r + discount * acc)
}

/// 1 when `l2 <= kappa` (inclusive), else 0.
pub fn sparse_reward(l2: f64, kappa: f64) -> f64 {
    if l2 <= kappa {
        1.0
    } else {
        0.0
    }
}

/// `-(alpha l1 + beta / (l2 - epsilon))`; errors inside the singular region.
pub fn dense_reward(l1: f64, l2: f64, alpha: f64, beta: f64, epsilon: f64) -> Result<f64> {
    if l2 <= epsilon {
        return Err(Error::RewardSingularity {
            l2,
            epsilon,
            floor: DENSE_FLOOR,
        });
    }
    Ok(-(alpha * l1 + beta / (l2 - epsilon)))
}

/// [`dense_reward`] bounded below by `floor`; the singular region maps to
/// `floor` and is logged.
pub fn dense_reward_guarded(l1: f64, l2: f64, alpha: f64, beta: f64, epsilon: f64, floor: f64) -> f64 {
    match dense_reward(l1, l2, alpha, beta, epsilon) {
        Ok(r) => r.max(floor),
        Err(e) => {
            log::debug!("{e}");
            floor
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn returns() {
        assert_eq!(compute_return(&[0.0, 0.0, 1.0], 1.0), 1.0);
        assert!((compute_return(&[1.0, 1.0], 0.99) - 1.99).abs() < 1e-15);
        assert_eq!(compute_return(&[], 0.9), 0.0);
    }

    #[test]
    fn sparse_boundary_is_inclusive() {
        assert_eq!(sparse_reward(0.005, 0.01), 1.0);
        assert_eq!(sparse_reward(0.01, 0.01), 1.0);
        assert_eq!(sparse_reward(0.02, 0.01), 0.0);
    }

    #[test]
    fn dense_reference_value() {
        let r = dense_reward(0.1, 0.05, DENSE_ALPHA, DENSE_BETA, DENSE_EPSILON).unwrap();
        assert!((r + 1.0400802).abs() < 1e-6);
    }

    #[test]
    fn dense_slope_in_l1() {
        let a = dense_reward(0.1, 0.05, DENSE_ALPHA, DENSE_BETA, DENSE_EPSILON).unwrap();
        let b = dense_reward(0.2, 0.05, DENSE_ALPHA, DENSE_BETA, DENSE_EPSILON).unwrap();
        assert!(((b - a) / 0.1 + 10.0).abs() < 1e-9);
    }

    #[test]
    fn dense_singularity() {
        assert!(matches!(
            dense_reward(0.0, 1e-4, DENSE_ALPHA, DENSE_BETA, DENSE_EPSILON),
            Err(Error::RewardSingularity { .. })
        ));
        assert_eq!(dense_reward_guarded(0.0, 0.0, DENSE_ALPHA, DENSE_BETA, DENSE_EPSILON, DENSE_FLOOR), DENSE_FLOOR);
        // just above epsilon the raw value is below the floor
        assert_eq!(dense_reward_guarded(0.0, 1.00001e-4, DENSE_ALPHA, DENSE_BETA, DENSE_EPSILON, DENSE_FLOOR), DENSE_FLOOR);
    }

    #[test]
    fn dense_vanishes_far_away() {
        let r = dense_reward(0.0, 1e6, DENSE_ALPHA, DENSE_BETA, DENSE_EPSILON).unwrap();
        assert!(r < 0.0 && r > -1e-8);
    }
}
