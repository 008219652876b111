use serde::{Deserialize, Serialize};

use super::action::{ActionBounds, Observation, ResidualAction};
use crate::error::{invalid, Error, Result};
use crate::linalg::{cholesky, pivot_condition};

/// Condition number above which the covariance is considered lost.
pub const MAX_CONDITION: f64 = 1e12;

/// Linear policy `a = clamp(W φ)` trained by recursive least squares.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearPolicyState {
    /// `n_out x n_features`.
    pub weights: Vec<Vec<f64>>,
    /// `n_features x n_features`, symmetric positive definite.
    pub covariance: Vec<Vec<f64>>,
    pub forgetting: f64,
    pub initial_variance: f64,
}

impl LinearPolicyState {
    pub fn new(n_out: usize, n_features: usize, forgetting: f64, initial_variance: f64) -> Result<Self> {
        if !(forgetting > 0.0 && forgetting <= 1.0) {
            return Err(invalid(format!("forgetting factor {forgetting} outside (0, 1]")));
        }
        if !(initial_variance > 0.0 && initial_variance.is_finite()) {
            return Err(invalid("initial variance must be positive"));
        }
        let mut s = Self {
            weights: vec![vec![0.0; n_features]; n_out],
            covariance: Vec::new(),
            forgetting,
            initial_variance,
        };
        s.reset_covariance();
        Ok(s)
    }

    /// Policy over [`Observation::features`] plus bias, emitting translation.
    pub fn for_observations(forgetting: f64, initial_variance: f64) -> Result<Self> {
        Self::new(3, super::FEATURE_DIM + 1, forgetting, initial_variance)
    }

    pub fn n_features(&self) -> usize {
        self.covariance.len()
    }

    pub fn reset_covariance(&mut self) {
        let n = self.weights.first().map_or(0, Vec::len);
        self.covariance = (0..n)
            .map(|i| (0..n).map(|j| if i == j { self.initial_variance } else { 0.0 }).collect())
            .collect();
    }

    pub fn predict(&self, phi: &[f64]) -> Vec<f64> {
        self.weights
            .iter()
            .map(|row| row.iter().zip(phi).map(|(w, p)| w * p).sum())
            .collect()
    }

    pub fn asymmetry(&self) -> f64 {
        let p = &self.covariance;
        let mut worst: f64 = 0.0;
        for i in 0..p.len() {
            for j in 0..i {
                worst = worst.max((p[i][j] - p[j][i]).abs());
            }
        }
        worst
    }

    pub fn condition(&self) -> f64 {
        cholesky(&self.covariance).map_or(f64::INFINITY, |l| pivot_condition(&l))
    }

    /// One RLS step toward `target`. On losing positive definiteness the
    /// covariance is reset and `CovarianceReset` is returned; weights are kept.
    pub fn update(&mut self, phi: &[f64], target: &[f64]) -> Result<()> {
        let n = self.n_features();
        if phi.len() != n || target.len() != self.weights.len() {
            return Err(invalid("feature or target dimension mismatch"));
        }
        if phi.iter().chain(target).any(|v| !v.is_finite()) {
            return Err(invalid("non-finite regression sample"));
        }
        let p = &self.covariance;
        let p_phi: Vec<f64> = p.iter().map(|row| row.iter().zip(phi).map(|(a, b)| a * b).sum()).collect();
        let denom = self.forgetting + phi.iter().zip(&p_phi).map(|(a, b)| a * b).sum::<f64>();
        let gain: Vec<f64> = p_phi.iter().map(|v| v / denom).collect();
        let pred = self.predict(phi);
        for (row, (y, yh)) in self.weights.iter_mut().zip(target.iter().zip(&pred)) {
            let e = y - yh;
            for (w, k) in row.iter_mut().zip(&gain) {
                *w += e * k;
            }
        }
        // P <- (P - k (P phi)^T) / lambda, then symmetrize.
        let lam = self.forgetting;
        let mut next = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in 0..=i {
                let a = (p[i][j] - gain[i] * p_phi[j]) / lam;
                let b = (p[j][i] - gain[j] * p_phi[i]) / lam;
                let v = 0.5 * (a + b);
                next[i][j] = v;
                next[j][i] = v;
            }
        }
        self.covariance = next;
        let cond = self.condition();
        if !(cond <= MAX_CONDITION) {
            self.reset_covariance();
            return Err(Error::CovarianceReset { condition: cond });
        }
        Ok(())
    }
}

/// Observation features with a trailing bias term.
pub fn linear_features(obs: &Observation) -> Vec<f64> {
    let mut f = obs.features();
    f.push(1.0);
    f
}

pub fn linear_policy_act(state: &LinearPolicyState, obs: &Observation, bounds: &ActionBounds) -> ResidualAction {
    let y = state.predict(&linear_features(obs));
    let mut a = ResidualAction::zero();
    for k in 0..3 {
        a.d_translation[k] = y.get(k).copied().unwrap_or(0.0).clamp(-bounds.translation, bounds.translation);
    }
    a
}

/// See [`LinearPolicyState::update`]; a covariance reset is logged and
/// swallowed so online use keeps running.
pub fn linear_policy_update(state: &mut LinearPolicyState, obs: &Observation, target: &[f64]) -> Result<()> {
    match state.update(&linear_features(obs), target) {
        Err(Error::CovarianceReset { condition }) => {
            log::warn!("rls covariance reset (condition {condition:.3e})");
            Ok(())
        }
        other => other,
    }
}

/// Goal-directed velocity used as the regression target: `gain * offset`,
/// clamped to the translation bound.
pub fn goal_directed_target(obs: &Observation, gain: f64, bounds: &ActionBounds) -> Vec<f64> {
    obs.goal_offset
        .0
        .iter()
        .map(|d| (gain * d).clamp(-bounds.translation, bounds.translation))
        .collect()
}
