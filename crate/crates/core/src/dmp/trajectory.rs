use std::io::{Read, Write};

use crate::error::{invalid, Error, Result};
use crate::orientation::UnitQuaternion;
use crate::scalar::Real;
use crate::vec3::Vec3;

/// Comment line written ahead of the header whenever orientation columns
/// are present.
pub const QUATERNION_HEADER_COMMENT: &str =
    "# quaternion convention: shuster (JPL), scalar-first qw,qx,qy,qz";

/// Uniformly sampled kinematic trajectory, one row per sample.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory<T> {
    pub timestamps: Vec<T>,
    pub positions: Vec<Vec<T>>,
    pub velocities: Vec<Vec<T>>,
    pub accelerations: Vec<Vec<T>>,
    pub orientations: Option<Vec<UnitQuaternion<T>>>,
}

impl<T: Real> Trajectory<T> {
    pub fn len(&self) -> usize {
        self.timestamps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.timestamps.is_empty()
    }

    pub fn dofs(&self) -> usize {
        self.positions.first().map_or(0, |r| r.len())
    }

    pub fn dt(&self) -> T {
        if self.len() < 2 {
            return T::zero();
        }
        self.timestamps[1] - self.timestamps[0]
    }

    pub fn duration(&self) -> T {
        match (self.timestamps.first(), self.timestamps.last()) {
            (Some(&a), Some(&b)) => b - a,
            _ => T::zero(),
        }
    }

    /// Largest per-DoF range of motion.
    pub fn spatial_extent(&self) -> T {
        (0..self.dofs())
            .map(|d| {
                let (lo, hi) = self.positions.iter().fold(
                    (T::infinity(), T::neg_infinity()),
                    |(lo, hi), r| (lo.min(r[d]), hi.max(r[d])),
                );
                hi - lo
            })
            .fold(T::zero(), T::max)
    }

    /// Checks sample count, row shapes and uniform spacing.
    pub fn validate(&self) -> Result<()> {
        let n = self.len();
        if n < 3 {
            return Err(invalid(format!("trajectory needs >= 3 samples, got {n}")));
        }
        let d = self.dofs();
        let rows_ok = [&self.positions, &self.velocities, &self.accelerations]
            .iter()
            .all(|m| m.len() == n && m.iter().all(|r| r.len() == d));
        if !rows_ok || d == 0 {
            return Err(invalid("trajectory rows are ragged"));
        }
        if let Some(q) = &self.orientations {
            if q.len() != n {
                return Err(invalid("orientation column length mismatch"));
            }
        }
        let dt = self.dt();
        if !(dt > T::zero()) {
            return Err(invalid("timestamps must increase"));
        }
        let tol = T::lit(1e-9);
        for w in self.timestamps.windows(2) {
            if ((w[1] - w[0]) - dt).abs() > tol {
                return Err(invalid("timestamps are not uniformly spaced"));
            }
        }
        Ok(())
    }

    /// Final orientation or the position row as a [`Vec3`] helper for 3-DoF data.
    pub fn position3(&self, i: usize) -> Vec3<T> {
        Vec3::from_slice(&self.positions[i])
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let d = self.dofs();
        if self.orientations.is_some() {
            writeln!(w, "{QUATERNION_HEADER_COMMENT}")?;
        }
        let mut header = vec!["t".to_string()];
        for prefix in ["x", "v", "a"] {
            header.extend((0..d).map(|i| format!("{prefix}{i}")));
        }
        if self.orientations.is_some() {
            header.extend(["qw", "qx", "qy", "qz"].map(String::from));
        }
        writeln!(w, "{}", header.join(","))?;
        for i in 0..self.len() {
            let mut row = vec![self.timestamps[i].to_f64_lossy()];
            row.extend(self.positions[i].iter().map(|v| v.to_f64_lossy()));
            row.extend(self.velocities[i].iter().map(|v| v.to_f64_lossy()));
            row.extend(self.accelerations[i].iter().map(|v| v.to_f64_lossy()));
            if let Some(q) = &self.orientations {
                row.extend(q[i].to_array().iter().map(|v| v.to_f64_lossy()));
            }
            let line: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
            writeln!(w, "{}", line.join(","))?;
        }
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .from_reader(r);
        let headers = rdr.headers()?.clone();
        let col = |name: &str| headers.iter().position(|h| h == name);
        let t_col = col("t").ok_or_else(|| Error::Format("missing column t".into()))?;
        let d = (0..).take_while(|i| col(&format!("x{i}")).is_some()).count();
        if d == 0 {
            return Err(Error::Format("no position columns x0..".into()));
        }
        let find = |p: &str| -> Vec<Option<usize>> { (0..d).map(|i| col(&format!("{p}{i}"))).collect() };
        let (xc, vc, ac) = (find("x"), find("v"), find("a"));
        let qc: Option<Vec<usize>> = ["qw", "qx", "qy", "qz"].iter().map(|n| col(n)).collect();

        let mut traj = Trajectory {
            timestamps: Vec::new(),
            positions: Vec::new(),
            velocities: Vec::new(),
            accelerations: Vec::new(),
            orientations: qc.as_ref().map(|_| Vec::new()),
        };
        for rec in rdr.records() {
            let rec = rec?;
            let get = |c: usize| -> Result<T> {
                rec.get(c)
                    .ok_or_else(|| Error::Format("short row".into()))?
                    .parse::<f64>()
                    .map(T::lit)
                    .map_err(|e| Error::Format(e.to_string()))
            };
            let row = |cols: &[Option<usize>]| -> Result<Vec<T>> {
                cols.iter().map(|c| c.map_or(Ok(T::zero()), get)).collect()
            };
            traj.timestamps.push(get(t_col)?);
            traj.positions.push(row(&xc)?);
            traj.velocities.push(row(&vc)?);
            traj.accelerations.push(row(&ac)?);
            if let (Some(cols), Some(qs)) = (&qc, traj.orientations.as_mut()) {
                let q = [get(cols[0])?, get(cols[1])?, get(cols[2])?, get(cols[3])?];
                qs.push(UnitQuaternion::from_array_normalized(q)?);
            }
        }
        // Velocity/acceleration columns are optional on input.
        if vc.iter().any(Option::is_none) || ac.iter().any(Option::is_none) {
            let dt = traj.dt();
            let fresh = differentiate_demo(&traj.positions, dt)?;
            traj.velocities = fresh.velocities;
            traj.accelerations = fresh.accelerations;
        }
        Ok(traj)
    }
}

/// Builds a trajectory from uniformly spaced positions using central
/// differences in the interior and one-sided differences at the ends.
pub fn differentiate_demo<T: Real>(positions: &[Vec<T>], dt: T) -> Result<Trajectory<T>> {
    let n = positions.len();
    if n < 3 {
        return Err(invalid(format!("need >= 3 samples to differentiate, got {n}")));
    }
    if !(dt > T::zero()) {
        return Err(invalid("dt must be positive"));
    }
    let d = positions[0].len();
    if positions.iter().any(|r| r.len() != d) {
        return Err(invalid("ragged position rows"));
    }
    let two = T::lit(2.0);
    let mut vel = vec![vec![T::zero(); d]; n];
    let mut acc = vec![vec![T::zero(); d]; n];
    for k in 0..d {
        for i in 1..n - 1 {
            vel[i][k] = (positions[i + 1][k] - positions[i - 1][k]) / (two * dt);
            acc[i][k] =
                (positions[i + 1][k] - two * positions[i][k] + positions[i - 1][k]) / (dt * dt);
        }
        vel[0][k] = (positions[1][k] - positions[0][k]) / dt;
        vel[n - 1][k] = (positions[n - 1][k] - positions[n - 2][k]) / dt;
        acc[0][k] = acc[1][k];
        acc[n - 1][k] = acc[n - 2][k];
    }
    Ok(Trajectory {
        timestamps: (0..n).map(|i| T::lit(i as f64) * dt).collect(),
        positions: positions.to_vec(),
        velocities: vel,
        accelerations: acc,
        orientations: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_positions_have_zero_derivatives() {
        let p = vec![vec![0.3f64, -1.0]; 20];
        let tr = differentiate_demo(&p, 0.01).unwrap();
        assert!(tr.velocities.iter().flatten().all(|v| *v == 0.0));
        assert!(tr.accelerations.iter().flatten().all(|v| *v == 0.0));
    }

    #[test]
    fn linear_positions_have_unit_velocity() {
        let p: Vec<Vec<f64>> = (0..50).map(|i| vec![i as f64 * 0.01]).collect();
        let tr = differentiate_demo(&p, 0.01).unwrap();
        for i in 1..49 {
            assert!((tr.velocities[i][0] - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn quadratic_positions_have_acceleration_two() {
        let dt = 0.01;
        let p: Vec<Vec<f64>> = (0..101).map(|i| vec![(i as f64 * dt).powi(2)]).collect();
        let tr = differentiate_demo(&p, dt).unwrap();
        for i in 1..100 {
            assert!((tr.accelerations[i][0] - 2.0).abs() < 1e-6);
        }
    }

    #[test]
    fn too_few_samples() {
        assert!(differentiate_demo(&[vec![0.0f64], vec![1.0]], 0.1).is_err());
    }

    #[test]
    fn csv_round_trip_with_orientation() {
        let p: Vec<Vec<f64>> = (0..5).map(|i| vec![i as f64, 0.5 * i as f64]).collect();
        let mut tr = differentiate_demo(&p, 0.1).unwrap();
        tr.orientations = Some(vec![UnitQuaternion::identity(); 5]);
        let mut buf = Vec::new();
        tr.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with('#'));
        assert!(text.lines().nth(1).unwrap().starts_with("t,x0,x1,v0,v1,a0,a1,qw"));
        let back = Trajectory::<f64>::read_csv(buf.as_slice()).unwrap();
        assert_eq!(back, tr);
    }

    #[test]
    fn uneven_timestamps_rejected() {
        let p: Vec<Vec<f64>> = (0..5).map(|i| vec![i as f64]).collect();
        let mut tr = differentiate_demo(&p, 0.1).unwrap();
        tr.timestamps[3] += 1e-3;
        assert!(tr.validate().is_err());
    }
}
