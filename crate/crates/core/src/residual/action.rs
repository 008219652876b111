use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::orientation::{apply_orientation_residual, AngleAxisResidual, UnitQuaternion, AXIS_FLOOR};
use crate::vec3::Vec3;

/// Proprioceptive observation handed to residual policies.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub position: Vec3<f64>,
    pub velocity: Vec3<f64>,
    pub orientation: UnitQuaternion<f64>,
    pub angular_velocity: Vec3<f64>,
    pub force: Vec3<f64>,
    pub phase: f64,
    /// Goal position minus current position.
    pub goal_offset: Vec3<f64>,
}

/// Number of entries produced by [`Observation::features`].
pub const FEATURE_DIM: usize = 20;

// Unit scales bringing each block to O(1) for the task geometry.
const POSITION_SCALE: f64 = 10.0;
const VELOCITY_SCALE: f64 = 20.0;
const FORCE_SCALE: f64 = 0.1;
const OFFSET_SCALE: f64 = 50.0;
const ROTATION_SCALE: f64 = 5.0;

impl Observation {
    pub fn is_finite(&self) -> bool {
        self.position.is_finite()
            && self.velocity.is_finite()
            && self.orientation.is_finite()
            && self.angular_velocity.is_finite()
            && self.force.is_finite()
            && self.phase.is_finite()
            && self.goal_offset.is_finite()
    }

    /// Fixed linear rescaling of the raw observation (no nonlinear features).
    pub fn features(&self) -> Vec<f64> {
        let mut f = Vec::with_capacity(FEATURE_DIM);
        f.extend(self.position.scale(POSITION_SCALE).0);
        f.extend(self.velocity.scale(VELOCITY_SCALE).0);
        let q = self.orientation.canonical();
        f.push(q.w);
        f.extend(q.xyz.scale(ROTATION_SCALE).0);
        f.extend(self.angular_velocity.0);
        f.extend(self.force.scale(FORCE_SCALE).0);
        f.push(self.phase);
        f.extend(self.goal_offset.scale(OFFSET_SCALE).0);
        f
    }
}

/// Per-decision magnitude limits of a residual action.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ActionBounds {
    /// Per-axis translational velocity limit (m/s).
    pub translation: f64,
    /// Rotation angle limit per decision (rad).
    pub alpha: f64,
}

impl Default for ActionBounds {
    fn default() -> Self {
        Self {
            translation: 0.005,
            alpha: 0.1,
        }
    }
}

/// Full-pose correction: translational velocity delta plus an angle-axis
/// rotation applied over one decision interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResidualAction {
    pub d_translation: Vec3<f64>,
    pub alpha: f64,
    pub axis: Vec3<f64>,
}

/// Raw action dimension for translation-only and full-pose policies.
pub const TRANSLATION_DIM: usize = 3;
pub const FULL_POSE_DIM: usize = 6;

impl ResidualAction {
    pub fn zero() -> Self {
        Self {
            d_translation: Vec3::zeros(),
            alpha: 0.0,
            axis: Vec3::new(0.0, 0.0, 1.0),
        }
    }

    /// Maps squashed outputs in `[-1, 1]` onto the bounds. Entries 0..3 are
    /// translation; entries 3..6 (full pose only) form a rotation vector
    /// `alpha_max * u` whose length is capped at `alpha_max`.
    pub fn from_unit(u: &[f64], bounds: &ActionBounds) -> Self {
        let mut a = Self::zero();
        for k in 0..3 {
            a.d_translation[k] = bounds.translation * u.get(k).copied().unwrap_or(0.0).clamp(-1.0, 1.0);
        }
        if u.len() >= FULL_POSE_DIM {
            let rho = Vec3::new(u[3], u[4], u[5]).map(|v| v.clamp(-1.0, 1.0)).scale(bounds.alpha);
            let n = rho.norm();
            if n >= AXIS_FLOOR {
                a.alpha = n.min(bounds.alpha);
                a.axis = rho;
            }
        }
        a
    }

    /// Inverse of [`ResidualAction::from_unit`] for actions within `bounds`.
    pub fn to_unit(&self, bounds: &ActionBounds, full_pose: bool) -> Vec<f64> {
        let scale = |v: f64, b: f64| if b > 0.0 { (v / b).clamp(-1.0, 1.0) } else { 0.0 };
        let mut u: Vec<f64> = self.d_translation.0.iter().map(|&v| scale(v, bounds.translation)).collect();
        if full_pose {
            let n = self.axis.norm();
            let rho = if n > 0.0 { self.axis.scale(self.alpha / n) } else { Vec3::zeros() };
            u.extend(rho.0.iter().map(|&v| scale(v, bounds.alpha)));
        }
        u
    }

    pub fn within(&self, bounds: &ActionBounds) -> bool {
        let eps = 1e-12;
        self.d_translation.0.iter().all(|v| v.abs() <= bounds.translation + eps) && self.alpha.abs() <= bounds.alpha + eps
    }

    pub fn angle_axis(&self) -> AngleAxisResidual<f64> {
        AngleAxisResidual {
            alpha: self.alpha,
            r: self.axis,
        }
    }

    /// Same action with every component multiplied by `gate`.
    pub fn gated(&self, gate: f64) -> Self {
        Self {
            d_translation: self.d_translation.scale(gate),
            alpha: self.alpha * gate,
            axis: self.axis,
        }
    }

    /// Portion of the action applied during one of `k` held substeps: the
    /// velocity repeats, the rotation angle is split evenly.
    pub fn per_substep(&self, k: usize) -> Self {
        Self {
            alpha: self.alpha / k.max(1) as f64,
            ..*self
        }
    }
}

/// Base-policy command: translational velocity and quaternion set-point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Twist {
    pub velocity: Vec3<f64>,
    pub orientation: UnitQuaternion<f64>,
}

/// Adds the translational residual and composes the rotational one as
/// `Q_f = Q_Δ ∘ Q_b`.
pub fn compose_full_pose(base: &Twist, residual: &ResidualAction) -> Result<Twist> {
    Ok(Twist {
        velocity: base.velocity + residual.d_translation,
        orientation: apply_orientation_residual(&base.orientation, &residual.angle_axis())?,
    })
}

/// Uniform random residual; the axis is uniform on the unit sphere.
pub fn random_policy<R: Rng + ?Sized>(rng: &mut R, bounds: &ActionBounds, full_pose: bool) -> ResidualAction {
    let mut a = ResidualAction::zero();
    for k in 0..3 {
        a.d_translation[k] = if bounds.translation > 0.0 {
            rng.gen_range(-bounds.translation..=bounds.translation)
        } else {
            0.0
        };
    }
    if full_pose {
        a.alpha = if bounds.alpha > 0.0 {
            rng.gen_range(-bounds.alpha..=bounds.alpha)
        } else {
            0.0
        };
        a.axis = random_unit_vector(rng);
    }
    a
}

pub fn random_unit_vector<R: Rng + ?Sized>(rng: &mut R) -> Vec3<f64> {
    loop {
        let v = Vec3::new(
            StandardNormal.sample(rng),
            StandardNormal.sample(rng),
            StandardNormal.sample(rng),
        );
        let n = v.norm();
        if n > 1e-12 {
            return v.scale(1.0 / n);
        }
    }
}
