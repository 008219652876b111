//! Archimedean spiral benchmark for the exploration loci.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use rlfd_core::dmp::{fit_from_demo, rollout, DmpGains, DmpState, Injection, Trajectory};
use rlfd_core::residual::{inject_exploration, ExplorationLocus};
use rlfd_core::{Dmp, Result};

use crate::demo::{min_jerk, N_BASIS_TRANSLATION};
use crate::runner::rng_for;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpiralSpec {
    pub turns: f64,
    /// Final radius (m).
    pub radius: f64,
    pub duration: f64,
    pub dt: f64,
    /// Standard deviation of the exploration noise, shared by every locus.
    pub sigma: f64,
    /// Integration steps per noise sample.
    pub rate_ratio: usize,
}

impl Default for SpiralSpec {
    fn default() -> Self {
        Self {
            turns: 3.0,
            radius: 0.1,
            duration: 5.0,
            dt: 1e-3,
            sigma: 0.05,
            rate_ratio: 10,
        }
    }
}

/// Planar spiral `r = radius * theta / theta_max` traversed with a
/// minimum-jerk angle profile, so it starts and ends at rest.
pub fn spiral_demo(spec: &SpiralSpec) -> Trajectory<f64> {
    let n = (spec.duration / spec.dt).round() as usize + 1;
    let theta_max = spec.turns * std::f64::consts::TAU;
    let b = spec.radius / theta_max;
    let mut traj = Trajectory {
        timestamps: Vec::with_capacity(n),
        positions: Vec::with_capacity(n),
        velocities: Vec::with_capacity(n),
        accelerations: Vec::with_capacity(n),
        orientations: None,
    };
    for i in 0..n {
        let t = i as f64 * spec.dt;
        let (p, v, a) = min_jerk(t / spec.duration);
        let th = theta_max * p;
        let thd = theta_max * v / spec.duration;
        let thdd = theta_max * a / (spec.duration * spec.duration);
        // r = b th; x = r cos th; y = r sin th.
        let (c, s) = (th.cos(), th.sin());
        let r = b * th;
        let rd = b * thd;
        let rdd = b * thdd;
        let x = r * c;
        let y = r * s;
        let xd = rd * c - r * s * thd;
        let yd = rd * s + r * c * thd;
        let xdd = rdd * c - 2.0 * rd * s * thd - r * c * thd * thd - r * s * thdd;
        let ydd = rdd * s + 2.0 * rd * c * thd - r * s * thd * thd + r * c * thdd;
        traj.timestamps.push(t);
        traj.positions.push(vec![x, y, 0.0]);
        traj.velocities.push(vec![xd, yd, 0.0]);
        traj.accelerations.push(vec![xdd, ydd, 0.0]);
    }
    traj
}

pub fn fit_spiral(spec: &SpiralSpec) -> Result<Dmp> {
    fit_from_demo(&spiral_demo(spec), N_BASIS_TRANSLATION, DmpGains::default())
}

/// One rollout of the fitted spiral with noise routed to `locus`.
/// Parameter-space noise is drawn once per rollout; coupling and task-space
/// noise are redrawn every `rate_ratio` steps.
pub fn spiral_variant(params: &Dmp, spec: &SpiralSpec, locus: ExplorationLocus, seed: u64) -> Result<Trajectory<f64>> {
    let mut rng = rng_for(seed, 11);
    let dofs = params.dofs();
    let n_basis = params.basis.len();
    let mut draw = |n: usize| -> Vec<f64> { (0..n).map(|_| spec.sigma * rng.sample::<f64, _>(StandardNormal)).collect() };
    let episodic = match locus {
        ExplorationLocus::ParameterSpace => Some(inject_exploration(locus, &draw(dofs * n_basis), dofs, n_basis, 1.0)?),
        _ => None,
    };
    let mut failure = None;
    let mut hook = |_: usize, _: f64, state: &DmpState<f64>| -> Injection<f64> {
        let inj = match locus {
            ExplorationLocus::None => Ok(Injection::none()),
            ExplorationLocus::ParameterSpace => Ok(episodic.clone().unwrap_or_else(Injection::none)),
            _ => inject_exploration(locus, &draw(dofs), dofs, n_basis, state.s.s),
        };
        inj.unwrap_or_else(|e| {
            failure.get_or_insert(e);
            Injection::none()
        })
    };
    let out = rollout(params, &params.y0, &params.goal, spec.duration, spec.dt, spec.rate_ratio, &mut hook)?;
    match failure {
        Some(e) => Err(e),
        None => Ok(out),
    }
}

/// Largest per-step change of acceleration divided by the step.
pub fn max_step_jerk(traj: &Trajectory<f64>) -> f64 {
    let dt = traj.dt();
    traj.accelerations
        .windows(2)
        .map(|w| w[0].iter().zip(&w[1]).map(|(a, b)| (b - a) * (b - a)).sum::<f64>().sqrt() / dt)
        .fold(0.0, f64::max)
}

/// The four exploration types: none, coupling term, parameter space and
/// task space, in that order.
pub const SPIRAL_VARIANTS: [(char, ExplorationLocus); 4] = [
    ('A', ExplorationLocus::None),
    ('B', ExplorationLocus::CouplingTerm),
    ('C', ExplorationLocus::ParameterSpace),
    ('D', ExplorationLocus::TaskSpace),
];

pub fn spiral_variants(spec: &SpiralSpec, seed: u64) -> Result<Vec<(char, ExplorationLocus, Trajectory<f64>)>> {
    let params = fit_spiral(spec)?;
    SPIRAL_VARIANTS
        .iter()
        .map(|&(tag, locus)| Ok((tag, locus, spiral_variant(&params, spec, locus, seed)?)))
        .collect()
}
