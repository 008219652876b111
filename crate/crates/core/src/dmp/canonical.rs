use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::scalar::Real;

/// Decay gain putting the phase at roughly 0.01 after one time constant.
pub const DEFAULT_ALPHA_S: f64 = 4.6;

/// Phase variable of the canonical system, decaying from 1 towards 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CanonicalState<T> {
    pub s: T,
    pub alpha_s: T,
    pub tau: T,
}

impl<T: Real> CanonicalState<T> {
    pub fn new(alpha_s: T, tau: T) -> Result<Self> {
        Self::at(T::one(), alpha_s, tau)
    }

    pub fn at(s: T, alpha_s: T, tau: T) -> Result<Self> {
        if !(tau > T::zero()) || !(alpha_s > T::zero()) {
            return Err(invalid("canonical system needs tau > 0 and alpha_s > 0"));
        }
        if !(s > T::zero() && s <= T::one()) {
            return Err(invalid(format!("phase {s} outside (0, 1]")));
        }
        Ok(Self { s, alpha_s, tau })
    }

    /// Phase reached after `t` seconds from `s = 1`.
    pub fn phase_at(&self, t: T) -> T {
        (-self.alpha_s * t / self.tau).exp()
    }
}

/// Advances the phase by `dt` using the closed-form exponential decay.
pub fn canonical_step<T: Real>(state: &CanonicalState<T>, dt: T) -> Result<CanonicalState<T>> {
    if !(dt > T::zero()) {
        return Err(invalid(format!("dt must be positive, got {dt}")));
    }
    let s = state.s * (-state.alpha_s * dt / state.tau).exp();
    // Underflow would leave the open interval; hold the last positive value.
    let s = if s > T::zero() { s } else { state.s };
    Ok(CanonicalState { s, ..*state })
}
