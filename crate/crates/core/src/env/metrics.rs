use serde::{Deserialize, Serialize};

use crate::learn::EpisodeRecord;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ForceStats {
    pub peak: f64,
    pub mean: f64,
    /// Time integral of the force magnitude (N s).
    pub impulse: f64,
}

pub fn force_stats(trace: &[f64], dt: f64) -> ForceStats {
    if trace.is_empty() {
        return ForceStats::default();
    }
    let sum: f64 = trace.iter().sum();
    ForceStats {
        peak: trace.iter().cloned().fold(0.0, f64::max),
        mean: sum / trace.len() as f64,
        impulse: sum * dt,
    }
}

pub fn measure_forces(episode: &EpisodeRecord) -> ForceStats {
    force_stats(&episode.force_trace, episode.env_dt)
}

/// Seconds until first success, the episode length otherwise.
pub fn measure_insertion_time(episode: &EpisodeRecord) -> f64 {
    match episode.success_step {
        Some(k) => k as f64 * episode.env_dt,
        None => episode.episode_length,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_force() {
        let s = force_stats(&[5.0; 100], 0.01);
        assert_eq!(s.peak, 5.0);
        assert!((s.mean - 5.0).abs() < 1e-12);
        assert!((s.impulse - 5.0).abs() < 1e-12);
    }

    #[test]
    fn free_space_is_zero() {
        assert_eq!(force_stats(&[0.0; 10], 0.01), ForceStats::default());
    }

    #[test]
    fn insertion_times() {
        let mut ep = EpisodeRecord { env_dt: 0.01, episode_length: 10.0, ..Default::default() };
        assert_eq!(measure_insertion_time(&ep), 10.0);
        ep.success_step = Some(510);
        assert!((measure_insertion_time(&ep) - 5.1).abs() < 1e-12);
        ep.success_step = Some(0);
        assert_eq!(measure_insertion_time(&ep), 0.0);
    }
}
