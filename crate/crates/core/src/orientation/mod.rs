//! Unit-quaternion algebra in Shuster's convention, the orientation
//! movement primitive and angle-axis residual corrections.

mod dmp;
mod quaternion;

pub use dmp::{
    angular_velocities, fit_orientation_dmp, orientation_dmp_step, orientation_rollout, OrientationDmpParams,
    OrientationState,
};
pub use quaternion::{
    angle_axis_to_quat, apply_orientation_residual, quat_compose, quat_error_to_angular_velocity, quat_exp,
    quat_log, AngleAxisResidual, UnitQuaternion, AXIS_FLOOR, UNIT_TOLERANCE,
};
