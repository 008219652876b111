use serde::{Deserialize, Serialize};

/// Start-radius schedule widened on sustained success.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Curriculum {
    pub increment: f64,
    pub threshold: f64,
    pub cap: f64,
}

impl Curriculum {
    /// Physical-analog schedule: 2.5 mm steps up to 1.5 cm.
    pub fn physical() -> Self {
        Self {
            increment: 0.0025,
            threshold: 0.8,
            cap: 0.015,
        }
    }
}

pub fn curriculum_step(current_radius: f64, success_rate_window: f64, c: &Curriculum) -> f64 {
    let r = current_radius.max(0.0);
    if r >= c.cap {
        return r;
    }
    if success_rate_window >= c.threshold {
        (r + c.increment).min(c.cap)
    } else {
        r
    }
}
