//! Commanded hand motion: Archimedean spiral search, constant-force press
//! regulation, and the vertical/lateral grasp frames.

use crate::compliance::Wrench;
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;

pub const STANDARD_GRAVITY: f64 = 9.80665;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SpiralDirection {
    Ccw,
    Cw,
}

/// Archimedean spiral over one normalized sweep: the radius moves linearly
/// from `r_start` to `r_end` while the angle completes `laps` revolutions.
/// The cw path is the exact mirror image (y negated) of the ccw path.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpiralParams {
    pub r_start: f64,
    pub r_end: f64,
    pub laps: u32,
    /// Sweep duration in unit time.
    pub duration: f64,
    pub x_offset: f64,
    pub y_offset: f64,
    pub direction: SpiralDirection,
    /// Grasp height reference carried alongside the path.
    pub z_ref: f64,
}

impl SpiralParams {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.r_start >= 0.0 && self.r_end >= 0.0) {
            return Err("spiral radii must be nonnegative".into());
        }
        if self.laps < 1 {
            return Err("spiral needs at least one lap".into());
        }
        if !(self.duration > 0.0) {
            return Err("spiral duration must be positive".into());
        }
        Ok(())
    }

    pub fn radius_at(&self, t: f64) -> f64 {
        (self.r_start - self.r_end) * ((self.duration - t) / self.duration) + self.r_end
    }
}

/// Spiral sample at unit time `t` in `[0, duration]`.
pub fn spiral_point(t: f64, p: &SpiralParams) -> Result<(f64, f64), String> {
    if !(0.0..=p.duration).contains(&t) {
        return Err(format!("t = {t} outside [0, {}]", p.duration));
    }
    let r = p.radius_at(t);
    let angle = TAU * p.laps as f64 * t / p.duration;
    let y_sign = match p.direction {
        SpiralDirection::Ccw => 1.0,
        SpiralDirection::Cw => -1.0,
    };
    Ok((
        r * angle.cos() + p.x_offset,
        y_sign * r * angle.sin() + p.y_offset,
    ))
}

/// Proportional regulator holding the vertical contact force at a target by
/// nudging the commanded hand height each step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PressController {
    pub target_force: f64,
    /// mm of height correction per N of force error per step.
    pub gain: f64,
    pub force_deadband: f64,
    /// Per-step height correction clamp, mm.
    pub max_step: f64,
}

impl PressController {
    /// Default regulator: proportional with no deadband, so the correction
    /// is monotone in the measured force and odd around the target.
    pub fn new(target_force: f64) -> Self {
        PressController {
            target_force,
            gain: 0.02,
            force_deadband: 0.0,
            max_step: 0.2,
        }
    }
}

/// Height correction for the current measured force: descend when pressing
/// too lightly, retreat when pressing too hard, hold inside the deadband.
pub fn press_step(current_force: f64, ctrl: &PressController) -> f64 {
    let error = ctrl.target_force - current_force;
    if error.abs() <= ctrl.force_deadband {
        return 0.0;
    }
    (-ctrl.gain * error).clamp(-ctrl.max_step, ctrl.max_step)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GraspOrientation {
    Vertical,
    Lateral,
}

/// Gravity bias wrench on the passive stage for a grasp orientation. The
/// site-frame kinematics are identical either way; a lateral grasp hangs the
/// stage mass on the finger's y slide.
pub fn grasp_frame(orientation: GraspOrientation, stage_mass_kg: f64) -> Wrench {
    match orientation {
        GraspOrientation::Vertical => Wrench::default(),
        GraspOrientation::Lateral => Wrench {
            fy: -stage_mass_kg * STANDARD_GRAVITY,
            ..Wrench::default()
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(direction: SpiralDirection) -> SpiralParams {
        SpiralParams {
            r_start: 5.0,
            r_end: 18.0,
            laps: 12,
            duration: 1.0,
            x_offset: 4.0,
            y_offset: -4.0,
            direction,
            z_ref: 20.0,
        }
    }

    #[test]
    fn spiral_endpoints() {
        let p = params(SpiralDirection::Ccw);
        let (x0, y0) = spiral_point(0.0, &p).unwrap();
        assert!((x0 - (5.0 + 4.0)).abs() < 1e-12);
        assert!((y0 - -4.0).abs() < 1e-12);
        let (x1, y1) = spiral_point(1.0, &p).unwrap();
        assert!((x1 - (18.0 + 4.0)).abs() < 1e-9);
        assert!((y1 - -4.0).abs() < 1e-9);
    }

    #[test]
    fn spiral_midpoint_radius() {
        // Radius is affine in t: 11.5 mm halfway between 5 and 18.
        let p = params(SpiralDirection::Ccw);
        assert!((p.radius_at(0.5) - 11.5).abs() < 1e-12);
    }

    #[test]
    fn spiral_rejects_time_outside_sweep() {
        let p = params(SpiralDirection::Ccw);
        assert!(spiral_point(-0.01, &p).is_err());
        assert!(spiral_point(1.01, &p).is_err());
    }

    #[test]
    fn cw_is_mirror_of_ccw() {
        let ccw = SpiralParams {
            y_offset: 0.0,
            ..params(SpiralDirection::Ccw)
        };
        let cw = SpiralParams {
            direction: SpiralDirection::Cw,
            ..ccw
        };
        for k in 0..=1000 {
            let t = k as f64 / 1000.0;
            let (xa, ya) = spiral_point(t, &ccw).unwrap();
            let (xb, yb) = spiral_point(t, &cw).unwrap();
            assert_eq!(xa, xb);
            assert_eq!(ya, -yb);
        }
    }

    #[test]
    fn radius_is_affine_in_t() {
        let p = params(SpiralDirection::Ccw);
        for k in 0..=1000 {
            let t = k as f64 / 1000.0;
            let line = p.r_start + (p.r_end - p.r_start) * t;
            let rel = (p.radius_at(t) - line).abs() / line.abs();
            assert!(rel < 1e-12);
        }
    }

    #[test]
    fn path_steps_are_bounded() {
        let p = params(SpiralDirection::Ccw);
        let bound = TAU * 12.0 * 18.0 / 2000.0 + 13.0 / 2000.0 + 1e-9;
        let mut prev = spiral_point(0.0, &p).unwrap();
        for k in 1..=2000 {
            let t = k as f64 / 2000.0;
            let cur = spiral_point(t, &p).unwrap();
            let d = ((cur.0 - prev.0).powi(2) + (cur.1 - prev.1).powi(2)).sqrt();
            assert!(d <= bound, "step {d} at t = {t} exceeds {bound}");
            prev = cur;
        }
    }

    #[test]
    fn press_holds_inside_deadband() {
        let ctrl = PressController::new(11.0);
        assert_eq!(press_step(11.0, &ctrl), 0.0);
        let with_band = PressController {
            force_deadband: 0.1,
            ..ctrl
        };
        assert_eq!(press_step(11.05, &with_band), 0.0);
        assert_eq!(press_step(10.95, &with_band), 0.0);
    }

    #[test]
    fn press_descends_clamped_when_unloaded() {
        let ctrl = PressController::new(11.0);
        assert_eq!(press_step(0.0, &ctrl), -0.2);
    }

    #[test]
    fn press_retreats_on_overload() {
        let ctrl = PressController::new(11.0);
        let dz = press_step(20.0, &ctrl);
        assert!((dz - 0.18).abs() < 1e-12, "got {dz}");
    }

    #[test]
    fn press_is_monotone_and_odd_around_target() {
        let ctrl = PressController::new(11.0);
        let mut prev = f64::INFINITY;
        for k in 0..=400 {
            let f = k as f64 * 0.1;
            let dz = press_step(f, &ctrl);
            assert!(dz <= prev + 1e-15, "press_step must be nonincreasing");
            prev = dz;
        }
        for df in [0.5, 1.0, 3.0, 8.0] {
            let a = press_step(11.0 - df, &ctrl);
            let b = press_step(11.0 + df, &ctrl);
            assert!((a + b).abs() < 1e-12, "odd around the target: {a} vs {b}");
        }
    }

    #[test]
    fn vertical_grasp_has_no_bias() {
        assert_eq!(grasp_frame(GraspOrientation::Vertical, 0.02), Wrench::default());
    }

    #[test]
    fn lateral_bias_is_stage_weight() {
        let w = grasp_frame(GraspOrientation::Lateral, 0.02);
        assert!((w.fy + 0.196133).abs() < 1e-6, "m*g = 0.196 N, got {}", w.fy);
        assert_eq!(grasp_frame(GraspOrientation::Lateral, 0.0), Wrench::default());
    }
}
