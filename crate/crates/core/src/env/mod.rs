//! Quasi-static peg-in-hole environment.
//!
//! The tip of the peg moves kinematically under a velocity command. Contact
//! projects the motion against the surface and the hole walls and reports
//! penalty forces (`stiffness * attempted penetration`).

mod config;
mod geometry;
mod metrics;
mod state;

pub use config::{is_sim_preset, make_task, EnvConfig, StartDistribution, KAPPA, PRESETS, RJ45_BREAK_FORCE};
pub use geometry::{CrossSection, SocketGeometry};
pub use metrics::{force_stats, measure_forces, measure_insertion_time, ForceStats};
pub use state::{env_reset, env_step, insertion_distance, observe, Command, EnvState, StepInfo, StepResult};
