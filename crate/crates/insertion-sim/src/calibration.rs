//! Finger and solver calibration, loaded from a plain-text key/value file.
//!
//! The shipped `data/calibration.toml` reproduces the finger's published
//! constants (spring rates, travel limits, magnet ranges); the remaining
//! values are fitted so the simulated insertion-limit sweeps and ablation
//! matrices land on the reference behaviour.

use crate::error::CalibrationError;
use serde::{Deserialize, Serialize};

pub const DEFAULT_CALIBRATION_TOML: &str = include_str!("../data/calibration.toml");

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Calibration {
    pub version: u32,
    pub travel: Travel,
    pub springs: Springs,
    pub magnet_x: MagnetX,
    pub magnet_yaw: MagnetYaw,
    pub coupling: Coupling,
    pub friction: Friction,
    pub solver: Solver,
    pub limits: Limits,
    pub catch: Catch,
}

/// Travel limits per axis; mm for x/y/z, degrees for yaw.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Travel {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub yaw: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Springs {
    /// z slide rate, N/mm.
    pub z: f64,
    /// y follow-up spring rate below the knee, N/mm.
    pub y_follow: f64,
    /// y main spring rate beyond the knee, N/mm.
    pub y_main: f64,
    /// y knee position, mm.
    pub y_knee: f64,
    /// x push spring rate, N/mm, engaging beyond `x_engage`.
    pub x_push: f64,
    /// x slide distance where the push spring engages, mm.
    pub x_engage: f64,
}

/// Opposed-magnet detent on the x slide. Force peaks near zero displacement
/// and decays below 1% of peak beyond `active_range`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MagnetX {
    /// Peak restoring force at the reference gap, N.
    pub peak_force: f64,
    /// Shape scale, mm; the peak sits at `shape / sqrt(3)`.
    pub shape: f64,
    /// Displacement beyond which the magnets no longer engage, mm.
    pub active_range: f64,
    /// Installed magnet gap, mm.
    pub gap: f64,
    pub gap_reference: f64,
    /// Gap-to-peak power law exponent (dipole repulsion ~ 1/gap^4).
    pub gap_exponent: f64,
}

/// Opposed-magnet detent on the yaw bearing; torque peaks at `peak_angle`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MagnetYaw {
    /// Peak restoring torque at the reference gap, N*mm.
    pub peak_torque: f64,
    /// Angle of peak torque, degrees.
    pub peak_angle: f64,
    pub gap: f64,
    pub gap_reference: f64,
    pub gap_exponent: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Coupling {
    /// Scales every axis law; explores lumping two fingers into one stage.
    pub parallel_factor: f64,
    /// Lever arm (mm) converting differential x slide into object rotation
    /// when the yaw bearing is locked.
    pub grip_radius: f64,
    /// Extra scale on the leveraged-x yaw path.
    pub pseudo_yaw_factor: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Friction {
    /// Coulomb coefficient between object bottom and site surfaces.
    pub mu: f64,
    /// Effective lever (mm) for rotational drag of a pressed flat bottom.
    pub rotational_radius: f64,
    /// Drag smoothing length (mm); keeps the drag energy differentiable.
    pub smoothing: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Solver {
    /// Contact penalty stiffness per boundary sample, N/mm.
    pub contact_stiffness: f64,
    /// Hard-stop penalty beyond travel, N/mm (also the locked-axis penalty).
    pub hard_stop_stiffness: f64,
    /// Generalized-force residual tolerance: N for x/y/z, N*mm for yaw.
    pub residual_tol: f64,
    pub max_iterations: usize,
    /// Displacement margin beyond travel before the grasp counts as lost.
    pub drop_margin: f64,
    /// Boundary sample spacing for contact generation, mm.
    pub sample_spacing: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Limits {
    /// Vertical load that aborts a trial, N.
    pub abort_force: f64,
    /// Mass of the passively moving stage, kg (gravity bias when lateral).
    pub stage_mass: f64,
}

/// Rim-edge hooking behaviour for lid fitting.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Catch {
    /// Height band above the entry plane within which a cleared corner arms.
    pub band: f64,
    /// Lateral constraint force that rips a hooked corner free, N.
    pub break_force: f64,
}

impl Calibration {
    pub fn from_toml(text: &str) -> Result<Self, CalibrationError> {
        let cal: Calibration = toml::from_str(text)?;
        cal.validate()?;
        Ok(cal)
    }

    pub fn shipped() -> Self {
        Self::from_toml(DEFAULT_CALIBRATION_TOML).expect("shipped calibration must be valid")
    }

    fn validate(&self) -> Result<(), CalibrationError> {
        let positive = [
            ("travel.x", self.travel.x),
            ("travel.y", self.travel.y),
            ("travel.z", self.travel.z),
            ("travel.yaw", self.travel.yaw),
            ("springs.z", self.springs.z),
            ("springs.y_follow", self.springs.y_follow),
            ("springs.y_main", self.springs.y_main),
            ("springs.y_knee", self.springs.y_knee),
            ("springs.x_push", self.springs.x_push),
            ("magnet_x.peak_force", self.magnet_x.peak_force),
            ("magnet_x.shape", self.magnet_x.shape),
            ("magnet_x.active_range", self.magnet_x.active_range),
            ("magnet_yaw.peak_torque", self.magnet_yaw.peak_torque),
            ("magnet_yaw.peak_angle", self.magnet_yaw.peak_angle),
            ("coupling.grip_radius", self.coupling.grip_radius),
            ("solver.contact_stiffness", self.solver.contact_stiffness),
            ("solver.hard_stop_stiffness", self.solver.hard_stop_stiffness),
            ("solver.residual_tol", self.solver.residual_tol),
            ("solver.drop_margin", self.solver.drop_margin),
            ("solver.sample_spacing", self.solver.sample_spacing),
            ("limits.abort_force", self.limits.abort_force),
            ("catch.band", self.catch.band),
            ("catch.break_force", self.catch.break_force),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(CalibrationError::OutOfRange(format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
        if !(0.5..=3.0).contains(&self.magnet_x.gap) {
            return Err(CalibrationError::OutOfRange(format!(
                "magnet_x.gap must lie in [0.5, 3.0] mm, got {}",
                self.magnet_x.gap
            )));
        }
        if !(1.0..=5.0).contains(&self.magnet_yaw.gap) {
            return Err(CalibrationError::OutOfRange(format!(
                "magnet_yaw.gap must lie in [1.0, 5.0] mm, got {}",
                self.magnet_yaw.gap
            )));
        }
        if self.friction.mu < 0.0 {
            return Err(CalibrationError::OutOfRange("friction.mu < 0".into()));
        }
        if self.limits.stage_mass < 0.0 {
            return Err(CalibrationError::OutOfRange("limits.stage_mass < 0".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shipped_calibration_loads() {
        let cal = Calibration::shipped();
        // Published finger constants.
        assert_eq!(cal.travel.x, 10.0);
        assert_eq!(cal.travel.y, 13.5);
        assert_eq!(cal.travel.z, 5.0);
        assert_eq!(cal.travel.yaw, 20.0);
        assert_eq!(cal.springs.z, 0.15);
        assert_eq!(cal.springs.y_follow, 0.15);
        assert_eq!(cal.springs.y_main, 0.67);
        assert_eq!(cal.springs.x_push, 0.78);
        assert_eq!(cal.magnet_yaw.peak_angle, 14.0);
        assert_eq!(cal.magnet_x.active_range, 4.0);
    }

    #[test]
    fn gap_range_is_enforced() {
        let mut text = DEFAULT_CALIBRATION_TOML.to_string();
        text = text.replace("gap = 1.75", "gap = 0.1");
        assert!(Calibration::from_toml(&text).is_err());
    }
}
