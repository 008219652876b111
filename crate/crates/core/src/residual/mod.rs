//! Residual corrections on top of the primitive: actions, injection loci,
//! scheduling and the non-learned baselines.

mod action;
mod linear;
mod locus;
mod schedule;

pub use action::{
    compose_full_pose, random_policy, random_unit_vector, ActionBounds, Observation, ResidualAction, Twist,
    FEATURE_DIM, FULL_POSE_DIM, TRANSLATION_DIM,
};
pub use linear::{
    goal_directed_target, linear_features, linear_policy_act, linear_policy_update, LinearPolicyState, MAX_CONDITION,
};
pub use locus::{inject_exploration, ExplorationLocus};
pub use schedule::{hold_and_interpolate, residual_schedule, Knot, QuinticSegment};
