//! Residual learning on top of dynamic movement primitives.
//!
//! The math core ([`dmp`], [`orientation`]) is generic over the scalar type
//! through [`Real`]; the learning and simulation layers run on `f64`. The
//! aliases below name the concrete instantiations used throughout.

pub mod dmp;
pub mod env;
pub mod error;
pub mod learn;
pub mod linalg;
pub mod orientation;
pub mod residual;
pub mod scalar;
pub mod vec3;

pub use error::{Error, Result};
pub use scalar::Real;
pub use vec3::Vec3;

pub type Dmp = dmp::DmpParams<f64>;
pub type Dmp32 = dmp::DmpParams<f32>;
pub type OrientationDmp = orientation::OrientationDmpParams<f64>;
pub type Quat = orientation::UnitQuaternion<f64>;
pub type Quat32 = orientation::UnitQuaternion<f32>;
pub type Vector3 = Vec3<f64>;
pub type Traj = dmp::Trajectory<f64>;
