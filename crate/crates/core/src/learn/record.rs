use serde::{Deserialize, Serialize};

/// One episode as seen by a learner. Vectors are aligned per decision.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    /// Policy input features.
    pub observations: Vec<Vec<f64>>,
    /// Pre-squash samples `u` (the action is `tanh(u)`).
    pub actions: Vec<Vec<f64>>,
    pub rewards: Vec<f64>,
    pub log_probs: Vec<f64>,
    pub values: Vec<f64>,
    /// Observation after the last decision, for bootstrapped learners.
    pub final_observation: Vec<f64>,
    pub success: bool,
    pub peak_force: f64,
    pub mean_force: f64,
    /// Environment step at which the task first succeeded.
    pub success_step: Option<usize>,
    pub episode_length: f64,
    /// Per-step contact-force magnitudes at the environment rate.
    pub force_trace: Vec<f64>,
    pub env_dt: f64,
}

impl EpisodeRecord {
    pub fn len(&self) -> usize {
        self.rewards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rewards.is_empty()
    }

    pub fn is_aligned(&self) -> bool {
        let n = self.rewards.len();
        self.observations.len() == n && self.actions.len() == n && self.log_probs.len() == n && self.values.len() == n
    }

    pub fn total_reward(&self) -> f64 {
        self.rewards.iter().sum()
    }
}
