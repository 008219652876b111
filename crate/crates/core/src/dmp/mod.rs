//! Point-to-point movement primitives: canonical phase, Gaussian forcing,
//! demonstration fitting and rollout with injection at the forcing weights,
//! the coupling term or directly on the acceleration.

mod basis;
mod canonical;
mod trajectory;
mod transform;

pub use basis::{basis_activations, BasisSet};
pub use canonical::{canonical_step, CanonicalState, DEFAULT_ALPHA_S};
pub use trajectory::{differentiate_demo, Trajectory, QUATERNION_HEADER_COMMENT};
pub use transform::{
    dmp_acceleration, dmp_step, dmp_step_with_forcing, fit_from_demo, forcing_term, rollout, DmpGains, DmpParams, DmpState,
    Injection, InjectionHook, NoInjection, RIDGE_LAMBDA,
};
pub(crate) use transform::ridge_forcing_weights;
