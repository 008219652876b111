use rand::Rng;
use serde::{Deserialize, Serialize};

use super::config::EnvConfig;
use crate::error::{invalid, Result};
use crate::orientation::{quat_compose, quat_exp, UnitQuaternion};
use crate::residual::{random_unit_vector, Observation};
use crate::vec3::Vec3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvState {
    /// Peg tip position (m).
    pub position: Vec3<f64>,
    /// End-effector orientation.
    pub orientation: UnitQuaternion<f64>,
    /// Latent peg-in-hand rotation; the peg orientation is `grasp ∘ ee`.
    pub grasp: UnitQuaternion<f64>,
    /// Latent lateral position of the hole axis (z = 0).
    pub hole: Vec3<f64>,
    pub velocity: Vec3<f64>,
    pub angular_velocity: Vec3<f64>,
    pub depth: f64,
    pub in_hole: bool,
    pub force: Vec3<f64>,
    pub normal_force: f64,
    pub friction_force: f64,
    pub elapsed: f64,
    pub broken: bool,
    pub success: bool,
}

impl EnvState {
    pub fn peg_orientation(&self) -> UnitQuaternion<f64> {
        self.grasp.shuster_product(&self.orientation).normalized().canonical()
    }
}

/// Velocity command at the environment rate.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Command {
    pub velocity: Vec3<f64>,
    pub angular_velocity: Vec3<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct StepInfo {
    pub success: bool,
    pub broken: bool,
    /// Attempted penetration into the blocking surface this step (m).
    pub penetration: f64,
    pub force_magnitude: f64,
    pub friction: f64,
    pub normal_force: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepResult {
    pub state: EnvState,
    pub observation: Observation,
    pub reward: f64,
    pub done: bool,
    pub info: StepInfo,
}

/// Samples a start pose: uniform box around the nominal start, orientation
/// uniform in angle up to the cone limit about a random axis, and a grasp
/// yaw whose magnitude is uniform in the configured range. The hole axis is
/// drawn uniformly from a disk around its nominal position.
pub fn env_reset<R: Rng + ?Sized>(config: &EnvConfig, rng: &mut R) -> EnvState {
    let s = &config.start;
    let mut position = s.center;
    if s.radius > 0.0 {
        for k in 0..3 {
            position[k] += rng.gen_range(-s.radius..=s.radius);
        }
    }
    let orientation = if s.max_orientation > 0.0 {
        let angle = rng.gen_range(0.0..=s.max_orientation);
        UnitQuaternion::from_axis_angle(random_unit_vector(rng), angle)
    } else {
        UnitQuaternion::identity()
    };
    let (lo, hi) = s.grasp_yaw;
    let grasp = if hi > 0.0 {
        let mag = rng.gen_range(lo..=hi);
        let sign = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
        UnitQuaternion::from_axis_angle(Vec3::new(0.0, 0.0, 1.0), sign * mag)
    } else {
        UnitQuaternion::identity()
    };
    let hole = if s.hole_offset > 0.0 {
        let r = s.hole_offset * rng.gen::<f64>().sqrt();
        let a = rng.gen_range(0.0..std::f64::consts::TAU);
        Vec3::new(r * a.cos(), r * a.sin(), 0.0)
    } else {
        Vec3::zeros()
    };
    let mut st = EnvState {
        position,
        orientation,
        grasp,
        hole,
        velocity: Vec3::zeros(),
        angular_velocity: Vec3::zeros(),
        depth: 0.0,
        in_hole: false,
        force: Vec3::zeros(),
        normal_force: 0.0,
        friction_force: 0.0,
        elapsed: 0.0,
        broken: false,
        success: false,
    };
    refresh_depth(&mut st, config, true);
    st
}

fn lateral_offset(p: &Vec3<f64>, hole: &Vec3<f64>) -> (f64, f64) {
    (p.x() - hole.x(), p.y() - hole.y())
}

/// A misaligned part resting in the mouth stays outside the bore; entry
/// needs alignment, and once inside only the lateral clamp applies.
fn refresh_depth(st: &mut EnvState, config: &EnvConfig, may_enter: bool) {
    let (x, y) = lateral_offset(&st.position, &st.hole);
    let r = x.hypot(y);
    st.in_hole = (st.in_hole || may_enter) && st.position.z() < 0.0 && r <= config.geometry.clearance + 1e-12;
    st.depth = if st.in_hole { (-st.position.z()).min(config.geometry.depth) } else { 0.0 };
    st.success = st.in_hole && st.depth >= config.geometry.depth - config.kappa;
}

/// Distances (L1, L2) from the peg tip to the set of fully inserted tip
/// positions: the hole bottom disk of radius `clearance`.
pub fn insertion_distance(state: &EnvState, config: &EnvConfig) -> (f64, f64) {
    let g = &config.geometry;
    let (x, y) = lateral_offset(&state.position, &state.hole);
    let r = x.hypot(y);
    let excess = (r - g.clearance).max(0.0);
    let (ex, ey) = if r > 0.0 { (x / r * excess, y / r * excess) } else { (0.0, 0.0) };
    let ez = state.position.z() + g.depth;
    (ex.abs() + ey.abs() + ez.abs(), (ex * ex + ey * ey + ez * ez).sqrt())
}

pub fn observe(state: &EnvState, config: &EnvConfig, phase: f64) -> Observation {
    Observation {
        position: state.position,
        velocity: state.velocity,
        orientation: state.peg_orientation(),
        angular_velocity: state.angular_velocity,
        force: state.force,
        phase,
        goal_offset: config.goal() - state.position,
    }
}

/// Integrates `cmd` for one step and projects it through the contact model.
pub fn env_step(state: &EnvState, cmd: &Command, config: &EnvConfig) -> Result<StepResult> {
    if !cmd.velocity.is_finite() || !cmd.angular_velocity.is_finite() {
        return Err(invalid("non-finite command"));
    }
    let g = &config.geometry;
    let dt = config.dt;
    let mut v = cmd.velocity;
    let speed = v.norm();
    if speed > config.max_speed {
        v = v.scale(config.max_speed / speed);
    }
    let orientation = quat_compose(&quat_exp(&cmd.angular_velocity.scale(dt)), &state.orientation)?;
    let mut next = EnvState {
        orientation,
        angular_velocity: cmd.angular_velocity,
        ..state.clone()
    };
    let aligned = g.is_aligned(&next.peg_orientation());

    let p = state.position;
    let mut q = p + v.scale(dt);
    let mut force = Vec3::zeros();
    let mut normal: f64 = 0.0;
    let mut friction: f64 = 0.0;
    let mut penetration: f64 = 0.0;

    if state.in_hole {
        // Lateral containment against the wall.
        let (qx, qy) = lateral_offset(&q, &state.hole);
        let r = qx.hypot(qy);
        if r > g.clearance {
            let excess = r - g.clearance;
            let (nx, ny) = (qx / r, qy / r);
            q[0] = state.hole.x() + nx * g.clearance;
            q[1] = state.hole.y() + ny * g.clearance;
            let wall_n = g.stiffness * excess;
            normal += wall_n;
            force += Vec3::new(-nx * wall_n, -ny * wall_n, 0.0);
            let dz = q.z() - p.z();
            let slip = dz.abs().min(g.friction * excess);
            q[2] = p.z() + dz - dz.signum() * slip;
            friction += g.stiffness * slip;
            force[2] += -dz.signum() * g.stiffness * slip;
            penetration = penetration.max(excess);
        }
        if !aligned && q.z() < p.z() {
            // Misaligned part jams: no further descent.
            let pen = p.z() - q.z();
            q[2] = p.z();
            normal += g.stiffness * pen;
            force[2] += g.stiffness * pen;
            penetration = penetration.max(pen);
        }
        if q.z() < -g.depth {
            let pen = -g.depth - q.z();
            q[2] = -g.depth;
            normal += g.stiffness * pen;
            force[2] += g.stiffness * pen;
            penetration = penetration.max(pen);
        }
    } else {
        let (hx, hy) = (state.hole.x(), state.hole.y());
        match g.surface_at(q.x(), q.y(), hx, hy, aligned) {
            Some((h, n)) if q.z() < h => {
                // Blocked by the local surface plane: penalty normal force and
                // Coulomb-style reduction of the tangential displacement.
                let pen = (h - q.z()) * n.z();
                penetration = pen;
                let d = q + n.scale(pen) - p;
                let d_normal = n.scale(d.dot(&n));
                let d_tan = d - d_normal;
                let slide = d_tan.norm();
                let budget = g.friction * pen;
                let keep = if slide <= budget { 0.0 } else { 1.0 - budget / slide };
                q = p + d_normal + d_tan.scale(keep);
                if let Some((h2, _)) = g.surface_at(q.x(), q.y(), hx, hy, aligned) {
                    if q.z() < h2 {
                        q[2] = h2;
                    }
                }
                let nf = g.stiffness * pen;
                normal += nf;
                force += n.scale(nf);
                if slide > 0.0 {
                    let f = g.stiffness * slide.min(budget);
                    force -= d_tan.scale(f / slide);
                    friction += f;
                }
            }
            None if q.z() < -g.depth => {
                let pen = -g.depth - q.z();
                q[2] = -g.depth;
                normal += g.stiffness * pen;
                force[2] += g.stiffness * pen;
                penetration = pen;
            }
            _ => {}
        }
    }

    next.position = q;
    next.velocity = (q - p).scale(1.0 / dt);
    next.force = force;
    next.normal_force = normal;
    next.friction_force = friction;
    next.elapsed = state.elapsed + dt;
    refresh_depth(&mut next, config, aligned);
    let magnitude = force.norm();
    if let Some(limit) = g.break_force {
        if magnitude > limit {
            next.broken = true;
        }
    }
    if next.broken {
        next.success = false;
    }
    let timeout = next.elapsed + 1e-9 >= config.episode_length;
    let done = next.success || next.broken || timeout;
    let (l1, l2) = insertion_distance(&next, config);
    let reward = if config.reward.is_per_step() || done {
        if next.broken {
            0.0
        } else {
            config.reward.evaluate(l1, l2)
        }
    } else {
        0.0
    };
    let observation = observe(&next, config, 0.0);
    Ok(StepResult {
        info: StepInfo {
            success: next.success,
            broken: next.broken,
            penetration,
            force_magnitude: magnitude,
            friction,
            normal_force: normal,
        },
        state: next,
        observation,
        reward,
        done,
    })
}
