use serde::{Deserialize, Serialize};

use super::geometry::{CrossSection, SocketGeometry};
use crate::error::{invalid, Result};
use crate::learn::RewardSpec;
use crate::vec3::Vec3;

/// Success tolerance on insertion depth (m).
pub const KAPPA: f64 = 0.002;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StartDistribution {
    /// Nominal peg-tip start (the demonstration start).
    pub center: Vec3<f64>,
    /// Per-axis half-width of the uniform start box (m).
    pub radius: f64,
    /// Largest geodesic offset of the start orientation (rad).
    pub max_orientation: f64,
    /// Range of the latent grasp yaw magnitude (rad), sign random.
    pub grasp_yaw: (f64, f64),
    /// Radius of the disk the true hole centre is drawn from, around the
    /// nominal position (m). Not observed.
    pub hole_offset: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvConfig {
    pub name: String,
    pub geometry: SocketGeometry,
    pub dt: f64,
    pub episode_length: f64,
    pub start: StartDistribution,
    pub reward: RewardSpec,
    pub kappa: f64,
    /// Largest commanded translational speed (m/s).
    pub max_speed: f64,
    pub seed: u64,
}

impl EnvConfig {
    pub fn validate(&self) -> Result<()> {
        self.geometry.validate()?;
        self.reward.validate()?;
        if !(self.dt > 0.0) || !(self.episode_length > 0.0) {
            return Err(invalid("dt and episode length must be positive"));
        }
        if !(self.start.radius >= 0.0) || !(self.start.max_orientation >= 0.0) || !(self.start.hole_offset >= 0.0) {
            return Err(invalid("start distribution must be non-negative"));
        }
        if !(self.start.grasp_yaw.0 >= 0.0 && self.start.grasp_yaw.1 >= self.start.grasp_yaw.0) {
            return Err(invalid("grasp yaw range must be ordered and non-negative"));
        }
        if !(self.kappa > 0.0 && self.kappa < self.geometry.depth) {
            return Err(invalid("kappa must lie in (0, depth)"));
        }
        Ok(())
    }

    pub fn steps(&self) -> usize {
        (self.episode_length / self.dt).round() as usize
    }

    /// Sim presets use the half-episode residual gate, physical-analog
    /// presets a fixed 3.9 s delay.
    pub fn default_gate_fraction(&self) -> f64 {
        if is_sim_preset(&self.name) {
            0.5
        } else {
            3.9 / self.episode_length
        }
    }

    /// Nominal hole bottom: the demonstrated tip position at full insertion.
    pub fn goal(&self) -> Vec3<f64> {
        Vec3::new(0.0, 0.0, -self.geometry.depth)
    }
}

pub const PRESETS: [&str; 5] = ["easy", "hard", "peg", "gear", "rj45"];

pub fn is_sim_preset(name: &str) -> bool {
    matches!(name, "easy" | "hard")
}

pub fn make_task(preset: &str) -> Result<EnvConfig> {
    let deg = f64::to_radians;
    let sim_start = StartDistribution {
        center: Vec3::new(-0.05, 0.0, 0.15),
        radius: 0.12,
        max_orientation: 0.0,
        grasp_yaw: (0.0, 0.0),
        hole_offset: 0.005,
    };
    let physical_start = |grasp: (f64, f64)| StartDistribution {
        center: Vec3::new(-0.03, 0.0, 0.08),
        radius: 0.03,
        max_orientation: deg(40.0),
        grasp_yaw: grasp,
        hole_offset: 0.0,
    };
    let round = |clearance: f64, depth: f64| SocketGeometry {
        cross_section: CrossSection::Round,
        peg_half_width: 0.01,
        clearance,
        depth,
        tilt: deg(1.0),
        friction: 0.4,
        stiffness: 10_000.0,
        chamfer_width: 0.004,
        chamfer_angle: deg(15.0),
        angular_tolerance: deg(2.0),
        break_force: None,
    };
    let (geometry, start) = match preset {
        "easy" => (round(0.004, 0.03), sim_start),
        "hard" => (round(0.0022, 0.03), sim_start),
        "peg" => (round(0.0004, 0.03), physical_start((0.0, deg(20.0)))),
        "gear" => (
            SocketGeometry {
                cross_section: CrossSection::Square,
                peg_half_width: 0.014,
                angular_tolerance: deg(3.0),
                ..round(0.0004, 0.03)
            },
            physical_start((0.0, deg(20.0))),
        ),
        "rj45" => (
            SocketGeometry {
                cross_section: CrossSection::Keyed,
                peg_half_width: 0.006,
                angular_tolerance: deg(2.0),
                break_force: Some(RJ45_BREAK_FORCE),
                ..round(0.0004, 0.015)
            },
            physical_start((deg(3.0), deg(20.0))),
        ),
        other => return Err(invalid(format!("unknown task preset '{other}'"))),
    };
    Ok(EnvConfig {
        name: preset.to_string(),
        geometry,
        dt: 0.01,
        episode_length: 10.0,
        start,
        reward: RewardSpec::sparse(KAPPA),
        kappa: KAPPA,
        max_speed: 0.25,
        seed: 0,
    })
}

/// Break threshold of the keyed connector (N).
pub const RJ45_BREAK_FORCE: f64 = 24.0;
