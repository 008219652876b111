use rlfd_core::dmp::{fit_from_demo, DmpGains, Trajectory};
use rlfd_core::env::{is_sim_preset, EnvConfig};
use rlfd_core::orientation::{fit_orientation_dmp, UnitQuaternion};
use rlfd_core::{Dmp, OrientationDmp, Result, Vec3};
use serde::{Deserialize, Serialize};

/// Shape of the synthesized demonstration: a minimum-jerk approach to a
/// point above the hole, a quick minimum-jerk descent to the hole bottom,
/// then rest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemoSpec {
    pub start: Vec3<f64>,
    pub goal: Vec3<f64>,
    /// Height of the pre-insertion point above the hole mouth (m).
    pub via_height: f64,
    /// Fraction of the duration spent on the approach.
    pub approach_fraction: f64,
    pub descent_duration: f64,
    pub duration: f64,
    pub dt: f64,
}

impl DemoSpec {
    pub fn for_task(config: &EnvConfig) -> Self {
        let (duration, approach_fraction) = if is_sim_preset(&config.name) { (5.0, 0.34) } else { (6.0, 0.45) };
        Self {
            start: config.start.center,
            goal: config.goal(),
            via_height: 0.01,
            approach_fraction,
            descent_duration: 0.5,
            duration,
            dt: 0.01,
        }
    }
}

/// Minimum-jerk profile on `[0, 1]`: position, velocity and acceleration of
/// the normalized blend.
pub(crate) fn min_jerk(u: f64) -> (f64, f64, f64) {
    let u = u.clamp(0.0, 1.0);
    let p = u * u * u * (10.0 - 15.0 * u + 6.0 * u * u);
    let v = 30.0 * u * u * (1.0 - u) * (1.0 - u);
    let a = 60.0 * u * (1.0 - u) * (1.0 - 2.0 * u);
    (p, v, a)
}

pub fn synthesize_demo(spec: &DemoSpec) -> Trajectory<f64> {
    let n = (spec.duration / spec.dt).round() as usize + 1;
    let via = Vec3::new(spec.goal.x(), spec.goal.y(), spec.via_height);
    let t1 = spec.approach_fraction * spec.duration;
    let t2 = spec.descent_duration;
    let mut traj = Trajectory {
        timestamps: Vec::with_capacity(n),
        positions: Vec::with_capacity(n),
        velocities: Vec::with_capacity(n),
        accelerations: Vec::with_capacity(n),
        orientations: Some(vec![UnitQuaternion::identity(); n]),
    };
    for i in 0..n {
        let t = i as f64 * spec.dt;
        let (from, to, t0, len) = if t <= t1 { (spec.start, via, 0.0, t1) } else { (via, spec.goal, t1, t2) };
        let (p, v, a) = min_jerk((t - t0) / len);
        let (v, a) = if t - t0 > len { (0.0, 0.0) } else { (v, a) };
        let d = to - from;
        traj.timestamps.push(t);
        traj.positions.push((from + d.scale(p)).to_vec());
        traj.velocities.push(d.scale(v / len).to_vec());
        traj.accelerations.push(d.scale(a / (len * len)).to_vec());
    }
    traj
}

/// Number of basis functions for the translational and rotational DMPs.
pub const N_BASIS_TRANSLATION: usize = 40;
pub const N_BASIS_ROTATION: usize = 70;

/// Fitted primitives plus the demonstration they came from.
#[derive(Debug, Clone)]
pub struct BasePolicy {
    pub demo: Trajectory<f64>,
    pub translation: Dmp,
    pub rotation: OrientationDmp,
}

pub fn fit_base_policy(demo: Trajectory<f64>) -> Result<BasePolicy> {
    let gains = DmpGains::default();
    let translation = fit_from_demo(&demo, N_BASIS_TRANSLATION, gains)?;
    let orientations = demo.orientations.clone().unwrap_or_else(|| vec![UnitQuaternion::identity(); demo.len()]);
    let rotation = fit_orientation_dmp(&orientations, demo.dt(), N_BASIS_ROTATION, gains)?;
    Ok(BasePolicy {
        demo,
        translation,
        rotation,
    })
}

pub fn base_policy_for(config: &EnvConfig) -> Result<BasePolicy> {
    fit_base_policy(synthesize_demo(&DemoSpec::for_task(config)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn min_jerk_endpoints() {
        assert_eq!(min_jerk(0.0), (0.0, 0.0, 0.0));
        let (p, v, a) = min_jerk(1.0);
        assert!((p - 1.0).abs() < 1e-15 && v.abs() < 1e-15 && a.abs() < 1e-12);
    }

    #[test]
    fn demo_reaches_goal() {
        let cfg = rlfd_core::env::make_task("easy").unwrap();
        let demo = synthesize_demo(&DemoSpec::for_task(&cfg));
        let last = demo.positions.last().unwrap();
        assert!((last[2] + cfg.geometry.depth).abs() < 1e-12);
        demo.validate().unwrap();
    }
}
