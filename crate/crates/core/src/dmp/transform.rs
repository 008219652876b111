use serde::{Deserialize, Serialize};

use super::basis::{basis_activations, BasisSet};
use super::canonical::{canonical_step, CanonicalState, DEFAULT_ALPHA_S};
use super::trajectory::Trajectory;
use crate::error::{invalid, Error, Result};
use crate::linalg::{cholesky, cholesky_solve, pivot_condition};
use crate::scalar::Real;

/// Ridge regularizer for the forcing-weight regression.
pub const RIDGE_LAMBDA: f64 = 1e-8;

/// Transformation-system gains; `beta_v` is always `alpha_v / 4`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DmpGains<T> {
    pub alpha_v: T,
    pub alpha_s: T,
}

impl<T: Real> Default for DmpGains<T> {
    fn default() -> Self {
        Self {
            alpha_v: T::lit(25.0),
            alpha_s: T::lit(DEFAULT_ALPHA_S),
        }
    }
}

impl<T: Real> DmpGains<T> {
    pub fn beta_v(&self) -> T {
        self.alpha_v / T::lit(4.0)
    }
}

/// Fitted point-to-point movement primitive.
///
/// `weights` is N×D: one row per basis function, one column per DoF.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DmpParams<T> {
    pub alpha_v: T,
    pub beta_v: T,
    pub alpha_s: T,
    pub tau: T,
    pub y0: Vec<T>,
    pub goal: Vec<T>,
    pub weights: Vec<Vec<T>>,
    pub basis: BasisSet<T>,
}

impl<T: Real> DmpParams<T> {
    /// Primitive with zero forcing: a critically damped spring to `goal`.
    pub fn unforced(y0: Vec<T>, goal: Vec<T>, tau: T, n_basis: usize, gains: DmpGains<T>) -> Result<Self> {
        if y0.len() != goal.len() || y0.is_empty() {
            return Err(invalid("start and goal dimensions differ"));
        }
        let basis = BasisSet::log_spaced(n_basis, gains.alpha_s)?;
        let p = Self {
            alpha_v: gains.alpha_v,
            beta_v: gains.beta_v(),
            alpha_s: gains.alpha_s,
            tau,
            weights: vec![vec![T::zero(); y0.len()]; n_basis],
            y0,
            goal,
            basis,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn dofs(&self) -> usize {
        self.goal.len()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tau > T::zero()) {
            return Err(invalid("tau must be positive"));
        }
        if self.weights.len() != self.basis.len()
            || self.weights.iter().any(|r| r.len() != self.goal.len())
        {
            return Err(invalid("weight matrix shape does not match basis x dofs"));
        }
        if self.weights.iter().flatten().any(|w| !w.is_finite()) {
            return Err(invalid("non-finite forcing weight"));
        }
        Ok(())
    }

    pub fn canonical(&self) -> Result<CanonicalState<T>> {
        CanonicalState::new(self.alpha_s, self.tau)
    }

    pub fn to_json(&self) -> Result<String>
    where
        T: Serialize,
    {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self>
    where
        T: for<'de> Deserialize<'de>,
    {
        let p: Self = serde_json::from_str(s)?;
        p.validate()?;
        Ok(p)
    }
}

/// Position, velocity (`y = dx/dt`) and phase of a running primitive.
#[derive(Debug, Clone, PartialEq)]
pub struct DmpState<T> {
    pub x: Vec<T>,
    pub v: Vec<T>,
    pub s: CanonicalState<T>,
}

impl<T: Real> DmpState<T> {
    pub fn at_rest(x: Vec<T>, params: &DmpParams<T>) -> Result<Self> {
        Ok(Self {
            v: vec![T::zero(); x.len()],
            x,
            s: params.canonical()?,
        })
    }
}

/// Exploration/correction signals entering the transformation system.
///
/// `weight_noise` perturbs the forcing weights (N×D), `coupling` is the
/// additive coupling term inside the gain bracket and `task` is added to the
/// acceleration outside of it. Missing entries are treated as zeros.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Injection<T> {
    pub weight_noise: Option<Vec<Vec<T>>>,
    pub coupling: Option<Vec<T>>,
    pub task: Option<Vec<T>>,
}

impl<T: Real> Injection<T> {
    pub fn none() -> Self {
        Self {
            weight_noise: None,
            coupling: None,
            task: None,
        }
    }

    fn is_finite(&self) -> bool {
        let f = |v: &[T]| v.iter().all(|x| x.is_finite());
        self.weight_noise.iter().flatten().all(|r| f(r))
            && self.coupling.as_deref().map_or(true, f)
            && self.task.as_deref().map_or(true, f)
    }
}

/// Phase-gated forcing `s * sum_i psi_i(s) w_i` per DoF.
pub fn forcing_term<T: Real>(s: T, params: &DmpParams<T>) -> Result<Vec<T>> {
    forcing_with_noise(s, params, None)
}

fn forcing_with_noise<T: Real>(
    s: T,
    params: &DmpParams<T>,
    noise: Option<&Vec<Vec<T>>>,
) -> Result<Vec<T>> {
    let psi = basis_activations(s, &params.basis)?;
    let mut f = vec![T::zero(); params.dofs()];
    for (i, &p) in psi.iter().enumerate() {
        for (d, fd) in f.iter_mut().enumerate() {
            let mut w = params.weights[i][d];
            if let Some(n) = noise {
                w += n[i][d];
            }
            *fd += p * w;
        }
    }
    Ok(f.into_iter().map(|v| v * s).collect())
}

/// Acceleration `dy/dt` of the transformation system at `state`.
pub fn dmp_acceleration<T: Real>(
    state: &DmpState<T>,
    params: &DmpParams<T>,
    inj: &Injection<T>,
) -> Result<Vec<T>> {
    let d = params.dofs();
    if state.x.len() != d || state.v.len() != d {
        return Err(invalid("state dimension does not match params"));
    }
    let f = forcing_with_noise(state.s.s, params, inj.weight_noise.as_ref())?;
    let tau2 = params.tau * params.tau;
    let zeros = vec![T::zero(); d];
    let coupling = inj.coupling.as_deref().unwrap_or(&zeros);
    let task = inj.task.as_deref().unwrap_or(&zeros);
    Ok((0..d)
        .map(|k| {
            let spring = params.alpha_v
                * (params.beta_v * (params.goal[k] - state.x[k]) - params.tau * state.v[k]);
            (spring + f[k] + coupling[k]) / tau2 + task[k]
        })
        .collect())
}

/// One explicit-Euler step of position, velocity and phase.
pub fn dmp_step<T: Real>(
    state: &DmpState<T>,
    params: &DmpParams<T>,
    dt: T,
    inj: &Injection<T>,
) -> Result<DmpState<T>> {
    if !(dt > T::zero()) {
        return Err(invalid("dt must be positive"));
    }
    let finite = state.x.iter().chain(&state.v).all(|v| v.is_finite());
    if !finite || !inj.is_finite() {
        return Err(invalid("non-finite state or injection"));
    }
    if let Some(n) = &inj.weight_noise {
        if n.len() != params.basis.len() || n.iter().any(|r| r.len() != params.dofs()) {
            return Err(invalid("weight noise shape mismatch"));
        }
    }
    let acc = dmp_acceleration(state, params, inj)?;
    let x = state.x.iter().zip(&state.v).map(|(&x, &v)| x + dt * v).collect();
    let v = state.v.iter().zip(&acc).map(|(&v, &a)| v + dt * a).collect();
    Ok(DmpState {
        x,
        v,
        s: canonical_step(&state.s, dt)?,
    })
}

/// [`dmp_step`] with the forcing value supplied by the caller. The forcing
/// depends on the phase only, so it can be tabulated once per rollout.
pub fn dmp_step_with_forcing<T: Real>(
    state: &DmpState<T>,
    params: &DmpParams<T>,
    dt: T,
    forcing: &[T],
    coupling: Option<&[T]>,
) -> Result<DmpState<T>> {
    let d = params.dofs();
    if forcing.len() != d || coupling.is_some_and(|c| c.len() != d) || state.x.len() != d {
        return Err(invalid("forcing or coupling dimension mismatch"));
    }
    let tau2 = params.tau * params.tau;
    let mut x = Vec::with_capacity(d);
    let mut v = Vec::with_capacity(d);
    for k in 0..d {
        let c = coupling.map_or(T::zero(), |c| c[k]);
        let spring = params.alpha_v * (params.beta_v * (params.goal[k] - state.x[k]) - params.tau * state.v[k]);
        let acc = (spring + forcing[k] + c) / tau2;
        x.push(state.x[k] + dt * state.v[k]);
        v.push(state.v[k] + dt * acc);
    }
    if x.iter().chain(&v).any(|a: &T| !a.is_finite()) {
        return Err(invalid("non-finite DMP state"));
    }
    Ok(DmpState {
        x,
        v,
        s: canonical_step(&state.s, dt)?,
    })
}

/// Fits forcing weights to a single demonstration by global ridge regression
/// on the inverted transformation system.
pub fn fit_from_demo<T: Real>(demo: &Trajectory<T>, n_basis: usize, gains: DmpGains<T>) -> Result<DmpParams<T>> {
    demo.validate()?;
    let extent = demo.spatial_extent();
    if !(extent > T::lit(1e-12)) {
        return Err(Error::FitFailure {
            reason: "demonstration has zero spatial extent".into(),
            extent: extent.to_f64_lossy(),
            condition: f64::INFINITY,
        });
    }
    let d = demo.dofs();
    let tau = demo.duration();
    let y0 = demo.positions[0].clone();
    let goal = demo.positions[demo.len() - 1].clone();
    let mut params = DmpParams::unforced(y0, goal, tau, n_basis, gains)?;
    let t0 = demo.timestamps[0];

    let canonical = params.canonical()?;
    let phases: Vec<T> = demo
        .timestamps
        .iter()
        .map(|&t| canonical.phase_at(t - t0))
        .collect();
    let targets: Vec<Vec<T>> = (0..demo.len())
        .map(|i| {
            (0..d)
                .map(|k| {
                    let x = demo.positions[i][k];
                    let xd = demo.velocities[i][k];
                    let xdd = demo.accelerations[i][k];
                    tau * tau * xdd
                        - params.alpha_v * (params.beta_v * (params.goal[k] - x) - tau * xd)
                })
                .collect()
        })
        .collect();
    let weights = ridge_forcing_weights(&phases, &targets, &params.basis, extent)?;
    params.weights = weights;
    Ok(params)
}

/// Least-squares forcing weights mapping `s * psi(s)` features onto the
/// per-sample targets (rows of `targets`, one column per DoF).
pub(crate) fn ridge_forcing_weights<T: Real>(
    phases: &[T],
    targets: &[Vec<T>],
    basis: &BasisSet<T>,
    extent: T,
) -> Result<Vec<Vec<T>>> {
    let n_basis = basis.len();
    let d = targets.first().map_or(0, |r| r.len());
    let mut gram = vec![vec![T::zero(); n_basis]; n_basis];
    let mut rhs = vec![vec![T::zero(); d]; n_basis];
    for (&s, target) in phases.iter().zip(targets) {
        let s = if s > T::zero() { s } else { T::min_positive_value() };
        let phi: Vec<T> = basis_activations(s, basis)?.into_iter().map(|p| p * s).collect();
        for a in 0..n_basis {
            for b in a..n_basis {
                gram[a][b] += phi[a] * phi[b];
            }
            for k in 0..d {
                rhs[a][k] += phi[a] * target[k];
            }
        }
    }
    for a in 0..n_basis {
        for b in 0..a {
            gram[a][b] = gram[b][a];
        }
        gram[a][a] += T::lit(RIDGE_LAMBDA);
    }
    let l = cholesky(&gram).ok_or_else(|| Error::FitFailure {
        reason: "normal equations not positive definite".into(),
        extent: extent.to_f64_lossy(),
        condition: f64::INFINITY,
    })?;
    let weights = cholesky_solve(&l, &rhs);
    if weights.iter().flatten().any(|w| !w.is_finite()) {
        return Err(Error::FitFailure {
            reason: "non-finite weights".into(),
            extent: extent.to_f64_lossy(),
            condition: pivot_condition(&l),
        });
    }
    Ok(weights)
}

/// Supplies injections during a rollout; called every `rate_ratio`-th step
/// and held in between.
pub trait InjectionHook<T> {
    fn inject(&mut self, step: usize, t: T, state: &DmpState<T>) -> Injection<T>;
}

impl<T, F> InjectionHook<T> for F
where
    F: FnMut(usize, T, &DmpState<T>) -> Injection<T>,
{
    fn inject(&mut self, step: usize, t: T, state: &DmpState<T>) -> Injection<T> {
        self(step, t, state)
    }
}

/// Hook that never injects anything.
pub struct NoInjection;

impl<T: Real> InjectionHook<T> for NoInjection {
    fn inject(&mut self, _: usize, _: T, _: &DmpState<T>) -> Injection<T> {
        Injection::none()
    }
}

/// Integrates the primitive from `start` (at rest) towards `goal` for
/// `duration` seconds.
pub fn rollout<T: Real, H: InjectionHook<T>>(
    params: &DmpParams<T>,
    start: &[T],
    goal: &[T],
    duration: T,
    dt: T,
    rate_ratio: usize,
    hook: &mut H,
) -> Result<Trajectory<T>> {
    if !(duration > T::zero()) || !(dt > T::zero()) {
        return Err(invalid("duration and dt must be positive"));
    }
    if start.len() != params.dofs() || goal.len() != params.dofs() {
        return Err(invalid("start/goal dimension mismatch"));
    }
    let rate_ratio = rate_ratio.max(1);
    let mut p = params.clone();
    p.goal = goal.to_vec();
    p.y0 = start.to_vec();
    let steps = (duration / dt).round().to_usize().unwrap_or(0).max(1);
    let mut state = DmpState::at_rest(start.to_vec(), &p)?;
    let mut inj = Injection::none();
    let mut out = Trajectory {
        timestamps: Vec::with_capacity(steps + 1),
        positions: Vec::with_capacity(steps + 1),
        velocities: Vec::with_capacity(steps + 1),
        accelerations: Vec::with_capacity(steps + 1),
        orientations: None,
    };
    for k in 0..=steps {
        let t = T::lit(k as f64) * dt;
        if k % rate_ratio == 0 {
            inj = hook.inject(k, t, &state);
        }
        let acc = dmp_acceleration(&state, &p, &inj)?;
        out.timestamps.push(t);
        out.positions.push(state.x.clone());
        out.velocities.push(state.v.clone());
        out.accelerations.push(acc);
        if k < steps {
            state = dmp_step(&state, &p, dt, &inj)?;
        }
    }
    Ok(out)
}
