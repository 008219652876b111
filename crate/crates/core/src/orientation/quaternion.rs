use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::scalar::{clamp, Real};
use crate::vec3::Vec3;

/// Tolerance on `|q| = 1` accepted by the checked operations.
pub const UNIT_TOLERANCE: f64 = 1e-6;

/// Axis norm below which a non-zero rotation angle is rejected.
pub const AXIS_FLOOR: f64 = 1e-8;

/// Unit quaternion `[w, x, y, z]` composed with Shuster's product.
///
/// `a ∘ b` satisfies `A(a ∘ b) = A(a) A(b)` for the attitude matrix `A`
/// returned by [`UnitQuaternion::attitude_matrix`]. The attitude matrix maps
/// world coordinates into body coordinates; [`UnitQuaternion::rotation_matrix`]
/// is its transpose, the active rotation taking body vectors into the world.
/// Consequently the left operand of `∘` acts in the body frame of the right
/// operand.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UnitQuaternion<T> {
    pub w: T,
    pub xyz: Vec3<T>,
}

impl<T: Real> UnitQuaternion<T> {
    pub fn identity() -> Self {
        Self {
            w: T::one(),
            xyz: Vec3::zeros(),
        }
    }

    /// Builds without normalizing. Callers must pass a unit quaternion.
    pub fn new_unchecked(w: T, xyz: Vec3<T>) -> Self {
        Self { w, xyz }
    }

    pub fn from_array_normalized(q: [T; 4]) -> Result<Self> {
        let raw = Self {
            w: q[0],
            xyz: Vec3::new(q[1], q[2], q[3]),
        };
        let n = raw.norm();
        if !(n > T::zero()) || !n.is_finite() {
            return Err(invalid("cannot normalize zero or non-finite quaternion"));
        }
        Ok(raw.scaled(T::one() / n))
    }

    /// Rotation of `angle` radians about `axis` (normalized internally).
    pub fn from_axis_angle(axis: Vec3<T>, angle: T) -> Self {
        let n = axis.norm();
        if n <= T::zero() {
            return Self::identity();
        }
        let half = angle / T::lit(2.0);
        Self {
            w: half.cos(),
            xyz: axis.scale(half.sin() / n),
        }
    }

    pub fn to_array(&self) -> [T; 4] {
        [self.w, self.xyz[0], self.xyz[1], self.xyz[2]]
    }

    pub fn norm(&self) -> T {
        (self.w * self.w + self.xyz.norm_squared()).sqrt()
    }

    fn scaled(&self, k: T) -> Self {
        Self {
            w: self.w * k,
            xyz: self.xyz.scale(k),
        }
    }

    pub fn normalized(&self) -> Self {
        self.scaled(T::one() / self.norm())
    }

    /// Representative with `w >= 0`.
    pub fn canonical(&self) -> Self {
        if self.w < T::zero() {
            self.scaled(-T::one())
        } else {
            *self
        }
    }

    pub fn conjugate(&self) -> Self {
        Self {
            w: self.w,
            xyz: -self.xyz,
        }
    }

    pub fn is_unit(&self, tol: T) -> bool {
        (self.norm() - T::one()).abs() <= tol
    }

    /// Raw Shuster product without normalization.
    pub fn shuster_product(&self, o: &Self) -> Self {
        let (w1, v1, w2, v2) = (self.w, self.xyz, o.w, o.xyz);
        Self {
            w: w1 * w2 - v1.dot(&v2),
            xyz: v2.scale(w1) + v1.scale(w2) - v1.cross(&v2),
        }
    }

    /// World-to-body attitude matrix (row-major).
    pub fn attitude_matrix(&self) -> [[T; 3]; 3] {
        let (w, v) = (self.w, self.xyz);
        let two = T::lit(2.0);
        let d = w * w - v.norm_squared();
        let mut m = [[T::zero(); 3]; 3];
        for (i, row) in m.iter_mut().enumerate() {
            for (j, e) in row.iter_mut().enumerate() {
                *e = two * v[i] * v[j] + if i == j { d } else { T::zero() };
            }
        }
        // -2w [v]x
        m[0][1] += two * w * v[2];
        m[0][2] -= two * w * v[1];
        m[1][0] -= two * w * v[2];
        m[1][2] += two * w * v[0];
        m[2][0] += two * w * v[1];
        m[2][1] -= two * w * v[0];
        m
    }

    /// Active body-to-world rotation matrix (transpose of the attitude matrix).
    pub fn rotation_matrix(&self) -> [[T; 3]; 3] {
        let a = self.attitude_matrix();
        let mut r = [[T::zero(); 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                r[i][j] = a[j][i];
            }
        }
        r
    }

    /// Rotates a body-frame vector into the world frame.
    pub fn rotate(&self, v: Vec3<T>) -> Vec3<T> {
        let r = self.rotation_matrix();
        Vec3::new(
            r[0][0] * v[0] + r[0][1] * v[1] + r[0][2] * v[2],
            r[1][0] * v[0] + r[1][1] * v[1] + r[1][2] * v[2],
            r[2][0] * v[0] + r[2][1] * v[1] + r[2][2] * v[2],
        )
    }

    /// Rotation angle of `self ∘ other⁻¹`, in `[0, π]`.
    pub fn geodesic_distance(&self, other: &Self) -> T {
        let d = self.shuster_product(&other.conjugate());
        let w = clamp(d.w.abs() / d.norm(), T::zero(), T::one());
        T::lit(2.0) * w.acos()
    }

    /// Twist angle about the body z axis, in `(-π, π]`.
    pub fn twist_about_z(&self) -> T {
        let q = self.canonical();
        T::lit(2.0) * q.xyz[2].atan2(q.w)
    }

    /// Angle between the body z axis and the world z axis.
    pub fn tilt_from_z(&self) -> T {
        let r = self.rotation_matrix();
        clamp(r[2][2], -T::one(), T::one()).acos()
    }

    pub fn is_finite(&self) -> bool {
        self.w.is_finite() && self.xyz.is_finite()
    }
}

fn check_unit<T: Real>(q: &UnitQuaternion<T>, what: &str) -> Result<()> {
    if !q.is_finite() || !q.is_unit(T::lit(UNIT_TOLERANCE)) {
        return Err(invalid(format!("{what} is not a unit quaternion (|q| = {})", q.norm())));
    }
    Ok(())
}

/// Shuster composition `a ∘ b`, renormalized and mapped to `w >= 0`.
pub fn quat_compose<T: Real>(a: &UnitQuaternion<T>, b: &UnitQuaternion<T>) -> Result<UnitQuaternion<T>> {
    check_unit(a, "left operand")?;
    check_unit(b, "right operand")?;
    Ok(a.shuster_product(b).normalized().canonical())
}

/// Rotation vector `2 acos(w) * xyz / |xyz|`; its norm is the rotation angle.
pub fn quat_log<T: Real>(q: &UnitQuaternion<T>) -> Vec3<T> {
    let q = q.canonical();
    let n = q.xyz.norm();
    if n <= T::zero() {
        return Vec3::zeros();
    }
    // atan2 keeps precision near the identity where acos(w) loses digits.
    let angle = T::lit(2.0) * n.atan2(q.w);
    q.xyz.scale(angle / n)
}

/// Inverse of [`quat_log`]: `[cos(|v|/2), sin(|v|/2) v/|v|]`.
pub fn quat_exp<T: Real>(v: &Vec3<T>) -> UnitQuaternion<T> {
    let n = v.norm();
    if n <= T::zero() {
        return UnitQuaternion::identity();
    }
    let half = n / T::lit(2.0);
    UnitQuaternion {
        w: half.cos(),
        xyz: v.scale(half.sin() / n),
    }
}

/// Angle-axis correction `{alpha, r}` predicted by a residual policy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AngleAxisResidual<T> {
    pub alpha: T,
    pub r: Vec3<T>,
}

impl<T: Real> AngleAxisResidual<T> {
    pub fn zero() -> Self {
        Self {
            alpha: T::zero(),
            r: Vec3::new(T::zero(), T::zero(), T::one()),
        }
    }
}

/// `Q_Δ = [cos(α/2), r/|r| sin(α/2)]`.
pub fn angle_axis_to_quat<T: Real>(res: &AngleAxisResidual<T>) -> Result<UnitQuaternion<T>> {
    let pi = T::PI();
    let slack = T::lit(1e-12);
    if !res.alpha.is_finite() || res.alpha.abs() > pi + slack {
        return Err(invalid(format!("alpha {} outside [-pi, pi]", res.alpha)));
    }
    if !res.r.is_finite() {
        return Err(invalid("non-finite rotation axis"));
    }
    if res.alpha == T::zero() {
        return Ok(UnitQuaternion::identity());
    }
    let n = res.r.norm();
    if n < T::lit(AXIS_FLOOR) {
        return Err(Error::DegenerateAxis {
            norm: n.to_f64_lossy(),
            alpha: res.alpha.to_f64_lossy(),
        });
    }
    let half = clamp(res.alpha, -pi, pi) / T::lit(2.0);
    Ok(UnitQuaternion {
        w: half.cos(),
        xyz: res.r.scale(half.sin() / n),
    })
}

/// `Q_f = Q_Δ ∘ Q_b`.
pub fn apply_orientation_residual<T: Real>(
    q_b: &UnitQuaternion<T>,
    res: &AngleAxisResidual<T>,
) -> Result<UnitQuaternion<T>> {
    if res.alpha == T::zero() {
        check_unit(q_b, "base orientation")?;
        return Ok(*q_b);
    }
    quat_compose(&angle_axis_to_quat(res)?, q_b)
}

/// Angular velocity that carries `q_current` onto `q_target` in `dt`
/// under `q' = exp(ω dt) ∘ q`.
pub fn quat_error_to_angular_velocity<T: Real>(
    q_target: &UnitQuaternion<T>,
    q_current: &UnitQuaternion<T>,
    dt: T,
) -> Result<Vec3<T>> {
    if !(dt > T::zero()) {
        return Err(invalid("dt must be positive"));
    }
    let err = quat_compose(q_target, &q_current.conjugate())?;
    Ok(quat_log(&err).scale(T::one() / dt))
}
