use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::orientation::UnitQuaternion;
use crate::vec3::Vec3;

fn unit(x: f64, y: f64, z: f64) -> Vec3<f64> {
    let v = Vec3::new(x, y, z);
    v.scale(1.0 / v.norm())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CrossSection {
    Round,
    Square,
    Keyed,
}

impl CrossSection {
    /// Yaw period of the section, `None` when yaw does not matter.
    pub fn symmetry(self) -> Option<f64> {
        match self {
            CrossSection::Round => None,
            CrossSection::Square => Some(std::f64::consts::FRAC_PI_2),
            CrossSection::Keyed => Some(2.0 * std::f64::consts::PI),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SocketGeometry {
    pub cross_section: CrossSection,
    pub peg_half_width: f64,
    /// Lateral play of the peg axis inside the hole (m).
    pub clearance: f64,
    pub depth: f64,
    /// Slope of the surface along x (rad); the hole axis stays vertical.
    pub tilt: f64,
    pub friction: f64,
    pub stiffness: f64,
    /// Radial width of the conical chamfer around the hole mouth (m).
    pub chamfer_width: f64,
    /// Slope of the chamfer (rad).
    pub chamfer_angle: f64,
    /// Yaw and tilt tolerance for non-round sections (rad).
    pub angular_tolerance: f64,
    /// Contact force above which the part breaks (N).
    pub break_force: Option<f64>,
}

impl SocketGeometry {
    pub fn validate(&self) -> Result<()> {
        if !(self.clearance > 0.0) || !(self.depth > 0.0) {
            return Err(invalid("clearance and depth must be positive"));
        }
        if !(self.friction >= 0.0) || !(self.stiffness > 0.0) {
            return Err(invalid("friction must be non-negative and stiffness positive"));
        }
        if !(0.0..=5f64.to_radians() + 1e-12).contains(&self.tilt) {
            return Err(invalid("surface tilt must lie in [0, 5] degrees"));
        }
        if !(self.chamfer_width >= 0.0) || !(0.0..std::f64::consts::FRAC_PI_2).contains(&self.chamfer_angle) {
            return Err(invalid("chamfer width must be non-negative and its slope below 90 degrees"));
        }
        if !(self.angular_tolerance > 0.0) || !(self.peg_half_width > 0.0) {
            return Err(invalid("angular tolerance and peg size must be positive"));
        }
        Ok(())
    }

    /// Height of the plane the socket sits on.
    pub fn surface_height(&self, x: f64) -> f64 {
        self.tilt.tan() * x
    }

    /// Height and outward unit normal of the solid surface under the lateral
    /// point `(x, y)` for a hole centred at `(hx, hy)`; `None` above an open
    /// mouth.
    pub fn surface_at(&self, x: f64, y: f64, hx: f64, hy: f64, aligned: bool) -> Option<(f64, Vec3<f64>)> {
        let (dx, dy) = (x - hx, y - hy);
        let r = dx.hypot(dy);
        let base = self.surface_height(x);
        let slope = self.tilt.tan();
        let chamfer = self.chamfer_angle.tan();
        if r <= self.clearance {
            if aligned {
                return None;
            }
            return Some((base - self.chamfer_width * chamfer, unit(-slope, 0.0, 1.0)));
        }
        if r <= self.clearance + self.chamfer_width {
            let h = base - (self.clearance + self.chamfer_width - r) * chamfer;
            let (ux, uy) = (dx / r, dy / r);
            return Some((h, unit(-slope - chamfer * ux, -chamfer * uy, 1.0)));
        }
        Some((base, unit(-slope, 0.0, 1.0)))
    }

    /// Yaw error of the peg folded into the section's symmetry period.
    pub fn yaw_misalignment(&self, peg: &UnitQuaternion<f64>) -> f64 {
        match self.cross_section.symmetry() {
            None => 0.0,
            Some(period) => {
                let yaw = peg.twist_about_z();
                let r = yaw.rem_euclid(period);
                r.min(period - r)
            }
        }
    }

    pub fn is_aligned(&self, peg: &UnitQuaternion<f64>) -> bool {
        match self.cross_section {
            CrossSection::Round => true,
            _ => {
                self.yaw_misalignment(peg) <= self.angular_tolerance && peg.tilt_from_z() <= self.angular_tolerance
            }
        }
    }
}
