use serde::{Deserialize, Serialize};

use super::quaternion::{
    apply_orientation_residual, quat_compose, quat_exp, quat_log, AngleAxisResidual, UnitQuaternion,
};
use crate::dmp::{basis_activations, canonical_step, ridge_forcing_weights, BasisSet, CanonicalState, DmpGains};
use crate::error::{invalid, Error, Result};
use crate::scalar::Real;
use crate::vec3::Vec3;

/// Orientation primitive acting on the rotation-vector goal error
/// `e = log(g ∘ q̄)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrientationDmpParams<T> {
    pub alpha_v: T,
    pub beta_v: T,
    pub alpha_s: T,
    pub tau: T,
    pub q0: UnitQuaternion<T>,
    pub goal: UnitQuaternion<T>,
    /// N×3 forcing weights.
    pub weights: Vec<Vec<T>>,
    pub basis: BasisSet<T>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrientationState<T> {
    pub q: UnitQuaternion<T>,
    /// Angular velocity (rad/s) under `q' = exp(eta dt) ∘ q`.
    pub eta: Vec3<T>,
    pub s: CanonicalState<T>,
}

impl<T: Real> OrientationDmpParams<T> {
    pub fn unforced(q0: UnitQuaternion<T>, goal: UnitQuaternion<T>, tau: T, n_basis: usize, gains: DmpGains<T>) -> Result<Self> {
        if !(tau > T::zero()) {
            return Err(invalid("tau must be positive"));
        }
        Ok(Self {
            alpha_v: gains.alpha_v,
            beta_v: gains.beta_v(),
            alpha_s: gains.alpha_s,
            tau,
            q0,
            goal,
            weights: vec![vec![T::zero(); 3]; n_basis],
            basis: BasisSet::log_spaced(n_basis, gains.alpha_s)?,
        })
    }

    pub fn initial_state(&self, q: UnitQuaternion<T>, eta: Vec3<T>) -> Result<OrientationState<T>> {
        Ok(OrientationState {
            q,
            eta,
            s: CanonicalState::new(self.alpha_s, self.tau)?,
        })
    }

    pub fn forcing(&self, s: T) -> Result<Vec3<T>> {
        let psi = basis_activations(s, &self.basis)?;
        let mut f = Vec3::zeros();
        for (p, w) in psi.iter().zip(&self.weights) {
            for k in 0..3 {
                f[k] += *p * w[k];
            }
        }
        Ok(f.scale(s))
    }

    /// Angular acceleration at `state` with optional coupling term.
    pub fn acceleration(&self, state: &OrientationState<T>, coupling: Option<&Vec3<T>>) -> Result<Vec3<T>> {
        self.acceleration_with_forcing(state, &self.forcing(state.s.s)?, coupling)
    }

    pub fn acceleration_with_forcing(
        &self,
        state: &OrientationState<T>,
        f: &Vec3<T>,
        coupling: Option<&Vec3<T>>,
    ) -> Result<Vec3<T>> {
        let err = quat_log(&quat_compose(&self.goal, &state.q.conjugate())?);
        let f = *f;
        let c = coupling.copied().unwrap_or_else(Vec3::zeros);
        let spring = (err.scale(self.beta_v) - state.eta.scale(self.tau)).scale(self.alpha_v);
        Ok((spring + f + c).scale(T::one() / (self.tau * self.tau)))
    }
}

/// One Euler step of the orientation primitive. A residual, when given, is
/// composed onto the integrated orientation as `Q_Δ ∘ q`.
pub fn orientation_dmp_step<T: Real>(
    state: &OrientationState<T>,
    params: &OrientationDmpParams<T>,
    dt: T,
    residual: Option<&AngleAxisResidual<T>>,
) -> Result<OrientationState<T>> {
    if !(dt > T::zero()) {
        return Err(invalid("dt must be positive"));
    }
    let acc = params.acceleration(state, None)?;
    let q = quat_compose(&quat_exp(&state.eta.scale(dt)), &state.q)?;
    let q = match residual {
        Some(r) => apply_orientation_residual(&q, r)?,
        None => q,
    };
    Ok(OrientationState {
        q,
        eta: state.eta + acc.scale(dt),
        s: canonical_step(&state.s, dt)?,
    })
}

/// Integrates from `q_start` with initial angular velocity `eta0`; returns
/// one orientation per step including the start.
pub fn orientation_rollout<T: Real>(
    params: &OrientationDmpParams<T>,
    q_start: UnitQuaternion<T>,
    eta0: Vec3<T>,
    duration: T,
    dt: T,
) -> Result<Vec<UnitQuaternion<T>>> {
    if !(duration > T::zero()) || !(dt > T::zero()) {
        return Err(invalid("duration and dt must be positive"));
    }
    let steps = (duration / dt).round().to_usize().unwrap_or(0).max(1);
    let mut st = params.initial_state(q_start, eta0)?;
    let mut out = Vec::with_capacity(steps + 1);
    out.push(st.q);
    for _ in 0..steps {
        st = orientation_dmp_step(&st, params, dt, None)?;
        out.push(st.q);
    }
    Ok(out)
}

/// Angular velocities of a uniformly sampled quaternion sequence (central
/// differences in the interior, one-sided at the ends).
pub fn angular_velocities<T: Real>(demo: &[UnitQuaternion<T>], dt: T) -> Result<Vec<Vec3<T>>> {
    let n = demo.len();
    if n < 3 {
        return Err(invalid("need >= 3 orientation samples"));
    }
    let rate = |a: &UnitQuaternion<T>, b: &UnitQuaternion<T>, h: T| -> Result<Vec3<T>> {
        Ok(quat_log(&quat_compose(a, &b.conjugate())?).scale(T::one() / h))
    };
    let mut out = Vec::with_capacity(n);
    out.push(rate(&demo[1], &demo[0], dt)?);
    for i in 1..n - 1 {
        out.push(rate(&demo[i + 1], &demo[i - 1], T::lit(2.0) * dt)?);
    }
    out.push(rate(&demo[n - 1], &demo[n - 2], dt)?);
    Ok(out)
}

/// Fits the orientation forcing weights to a quaternion demonstration.
pub fn fit_orientation_dmp<T: Real>(
    demo: &[UnitQuaternion<T>],
    dt: T,
    n_basis: usize,
    gains: DmpGains<T>,
) -> Result<OrientationDmpParams<T>> {
    if demo.len() < 3 {
        return Err(invalid("need >= 3 orientation samples"));
    }
    if !(dt > T::zero()) {
        return Err(invalid("dt must be positive"));
    }
    if demo.iter().any(|q| !q.is_unit(T::lit(1e-6))) {
        return Err(invalid("demonstration contains non-unit quaternions"));
    }
    let n = demo.len();
    let tau = T::lit((n - 1) as f64) * dt;
    let goal = demo[n - 1];
    let mut params = OrientationDmpParams::unforced(demo[0], goal, tau, n_basis, gains)?;
    let omega = angular_velocities(demo, dt)?;
    let mut omega_dot = vec![Vec3::zeros(); n];
    for i in 1..n - 1 {
        omega_dot[i] = (omega[i + 1] - omega[i - 1]).scale(T::one() / (T::lit(2.0) * dt));
    }
    omega_dot[0] = (omega[1] - omega[0]).scale(T::one() / dt);
    omega_dot[n - 1] = (omega[n - 1] - omega[n - 2]).scale(T::one() / dt);

    let extent = demo
        .iter()
        .map(|q| q.geodesic_distance(&goal))
        .fold(T::zero(), T::max);
    let canonical = CanonicalState::new(params.alpha_s, tau)?;
    let mut phases = Vec::with_capacity(n);
    let mut targets = Vec::with_capacity(n);
    for i in 0..n {
        let t = T::lit(i as f64) * dt;
        phases.push(canonical.phase_at(t));
        let err = quat_log(&quat_compose(&goal, &demo[i].conjugate())?);
        let target = omega_dot[i].scale(tau * tau)
            - (err.scale(params.beta_v) - omega[i].scale(tau)).scale(params.alpha_v);
        targets.push(target.to_vec());
    }
    params.weights = ridge_forcing_weights(&phases, &targets, &params.basis, extent)
        .map_err(|e| match e {
            Error::FitFailure { reason, condition, .. } => Error::FitFailure {
                reason: format!("orientation: {reason}"),
                extent: extent.to_f64_lossy(),
                condition,
            },
            other => other,
        })?;
    Ok(params)
}
