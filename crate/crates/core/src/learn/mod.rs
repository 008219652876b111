//! Policy-gradient learners over small networks, rewards and schedules.

mod checkpoint;
mod curriculum;
mod curves;
mod nn;
mod policy;
mod ppo;
mod record;
mod reward;
mod sac;

pub use checkpoint::{config_hash, load_checkpoint, save_checkpoint, CheckpointManifest, NetworkEntry};
pub use curriculum::{curriculum_step, Curriculum};
pub use curves::{read_training_curve, write_training_curve, CurveRow};
pub use nn::{clip_grad_norm, Activation, Adam, Mlp};
pub use policy::{
    atanh_clamped, gaussian_log_prob, gaussian_log_prob_grad, softplus, squash_log_jacobian, squashed_log_prob, Head,
    PolicySample, TanhGaussianPolicy, LOG_STD_MAX, LOG_STD_MIN,
};
pub use ppo::{
    clipped_surrogate, gae, surrogate_loss_and_grad, value_loss_and_grad, Ppo, PpoConfig, PpoDiagnostics,
    SurrogateSample,
};
pub use record::EpisodeRecord;
pub use reward::{
    compute_return, dense_reward, dense_reward_guarded, sparse_reward, RewardSpec, DENSE_ALPHA, DENSE_BETA,
    DENSE_EPSILON, DENSE_FLOOR,
};
pub use sac::{critic_loss_and_grad, ReplayBuffer, Sac, SacConfig, SacDiagnostics, Transition};
