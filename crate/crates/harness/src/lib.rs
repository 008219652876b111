//! Experiment orchestration: demonstrations, episode rollouts, training
//! loops, the experiment families and their reports.

pub mod demo;
pub mod experiments;
pub mod spiral;
pub mod runner;
pub mod train;
