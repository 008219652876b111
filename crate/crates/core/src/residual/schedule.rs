use super::action::ResidualAction;
use crate::error::{invalid, Result};

// Absorbs rounding in `fraction * episode_length`.
const GATE_SLACK: f64 = 1e-9;

/// Residual gate: 0 until `fraction * episode_length`, 1 afterwards.
pub fn residual_schedule(t: f64, episode_length: f64, activation_fraction: f64) -> f64 {
    if t + GATE_SLACK >= activation_fraction * episode_length {
        1.0
    } else {
        0.0
    }
}

/// Position, velocity and acceleration of one DOF set.
#[derive(Debug, Clone, PartialEq)]
pub struct Knot {
    pub p: Vec<f64>,
    pub v: Vec<f64>,
    pub a: Vec<f64>,
}

/// Fifth-order polynomial matching position, velocity and acceleration at
/// both ends of `[0, duration]`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuinticSegment {
    coeffs: Vec<[f64; 6]>,
    pub duration: f64,
}

impl QuinticSegment {
    pub fn new(from: &Knot, to: &Knot, duration: f64) -> Result<Self> {
        if !(duration > 0.0) {
            return Err(invalid("segment duration must be positive"));
        }
        let n = from.p.len();
        if [from.v.len(), from.a.len(), to.p.len(), to.v.len(), to.a.len()].iter().any(|&l| l != n) {
            return Err(invalid("knot dimension mismatch"));
        }
        let t = duration;
        let (t2, t3, t4, t5) = (t * t, t * t * t, t.powi(4), t.powi(5));
        let coeffs = (0..n)
            .map(|i| {
                let (p0, v0, a0) = (from.p[i], from.v[i], from.a[i]);
                let (p1, v1, a1) = (to.p[i], to.v[i], to.a[i]);
                let c3 = (20.0 * (p1 - p0) - (8.0 * v1 + 12.0 * v0) * t - (3.0 * a0 - a1) * t2) / (2.0 * t3);
                let c4 = (-30.0 * (p1 - p0) + (14.0 * v1 + 16.0 * v0) * t + (3.0 * a0 - 2.0 * a1) * t2) / (2.0 * t4);
                let c5 = (12.0 * (p1 - p0) - 6.0 * (v1 + v0) * t - (a0 - a1) * t2) / (2.0 * t5);
                [p0, v0, 0.5 * a0, c3, c4, c5]
            })
            .collect();
        Ok(Self { coeffs, duration })
    }

    pub fn eval(&self, t: f64) -> Knot {
        let mut k = Knot {
            p: Vec::with_capacity(self.coeffs.len()),
            v: Vec::with_capacity(self.coeffs.len()),
            a: Vec::with_capacity(self.coeffs.len()),
        };
        for c in &self.coeffs {
            k.p.push(((((c[5] * t + c[4]) * t + c[3]) * t + c[2]) * t + c[1]) * t + c[0]);
            k.v.push((((5.0 * c[5] * t + 4.0 * c[4]) * t + 3.0 * c[3]) * t + 2.0 * c[2]) * t + c[1]);
            k.a.push(((20.0 * c[5] * t + 12.0 * c[4]) * t + 6.0 * c[3]) * t + 2.0 * c[2]);
        }
        k
    }
}

/// Upsamples residual-rate set-points by `k`: quintic between knots spaced
/// `interval` apart, residual repeated unchanged over each block.
pub fn hold_and_interpolate(
    knots: &[Knot],
    residuals: &[ResidualAction],
    interval: f64,
    k: usize,
) -> Result<Vec<(Knot, ResidualAction)>> {
    if k == 0 {
        return Err(invalid("rate ratio must be at least 1"));
    }
    if knots.len() != residuals.len() {
        return Err(invalid("one residual per knot required"));
    }
    let Some(last) = knots.last() else {
        return Ok(Vec::new());
    };
    let mut out = Vec::with_capacity((knots.len() - 1) * k + 1);
    for (i, pair) in knots.windows(2).enumerate() {
        if k == 1 {
            out.push((pair[0].clone(), residuals[i]));
            continue;
        }
        let seg = QuinticSegment::new(&pair[0], &pair[1], interval)?;
        for j in 0..k {
            out.push((seg.eval(interval * j as f64 / k as f64), residuals[i]));
        }
    }
    out.push((last.clone(), residuals[knots.len() - 1]));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vec3::Vec3;

    #[test]
    fn gate_is_zero_in_first_half() {
        assert_eq!(residual_schedule(0.3 * 8.0, 8.0, 0.5), 0.0);
        assert_eq!(residual_schedule(0.5 * 8.0, 8.0, 0.5), 1.0);
    }

    #[test]
    fn gate_switches_at_three_point_nine() {
        assert_eq!(residual_schedule(3.9 - 1e-3, 10.0, 0.39), 0.0);
        assert_eq!(residual_schedule(3.9, 10.0, 0.39), 1.0);
    }

    #[test]
    fn zero_fraction_always_on() {
        assert_eq!(residual_schedule(0.0, 10.0, 0.0), 1.0);
    }

    fn cubic(t: f64) -> Knot {
        Knot {
            p: vec![1.0 + 2.0 * t - t * t + 0.5 * t * t * t],
            v: vec![2.0 - 2.0 * t + 1.5 * t * t],
            a: vec![-2.0 + 3.0 * t],
        }
    }

    #[test]
    fn quintic_reproduces_cubic() {
        let seg = QuinticSegment::new(&cubic(0.0), &cubic(0.7), 0.7).unwrap();
        for t in [0.0, 0.1, 0.35, 0.7] {
            let a = seg.eval(t);
            let b = cubic(t);
            assert!((a.p[0] - b.p[0]).abs() < 1e-12);
            assert!((a.v[0] - b.v[0]).abs() < 1e-11);
            assert!((a.a[0] - b.a[0]).abs() < 1e-10);
        }
    }

    #[test]
    fn unit_ratio_passes_through() {
        let knots: Vec<Knot> = (0..4).map(|i| cubic(i as f64 * 0.1)).collect();
        let res = vec![ResidualAction::zero(); 4];
        let out = hold_and_interpolate(&knots, &res, 0.1, 1).unwrap();
        let got: Vec<Knot> = out.into_iter().map(|(k, _)| k).collect();
        assert_eq!(got, knots);
    }

    #[test]
    fn residual_held_across_block() {
        let knots: Vec<Knot> = (0..3).map(|i| cubic(i as f64 * 0.1)).collect();
        let mut res = vec![ResidualAction::zero(); 3];
        res[0].d_translation = Vec3::new(0.1, 0.0, 0.0);
        res[1].d_translation = Vec3::new(0.0, 0.2, 0.0);
        let out = hold_and_interpolate(&knots, &res, 0.1, 5).unwrap();
        assert_eq!(out.len(), 11);
        assert!(out[..5].iter().all(|(_, r)| *r == res[0]));
        assert!(out[5..10].iter().all(|(_, r)| *r == res[1]));
    }
}
