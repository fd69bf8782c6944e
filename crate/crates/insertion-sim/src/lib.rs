//! Quasi-static simulation of compliant-finger insertion tasks.
//!
//! A parallel gripper whose fingers passively adapt along four axes
//! (x, y, z, yaw) can seat pegs and container lids despite sizeable pose
//! errors, using nothing smarter than a spiral sweep pressed at constant
//! force. This crate models that closed loop at desk scale:
//!
//! - [`geometry`]: convex cross-sections, chamfered holes and raised rims,
//!   containment and contact queries.
//! - [`compliance`]: per-axis passive force laws (springs and opposed-magnet
//!   detents), potential energy, and the equilibrium solve placing the
//!   grasped object under load.
//! - [`trajectory`]: spiral search paths, constant-force press regulation,
//!   and grasp-frame gravity bias.
//! - [`simulator`]: the quasi-static stepping loop for one trial, with full
//!   trace capture, plus straight-plunge insertability sweeps.
//! - [`harness`]: batch experiment runner reproducing the offset-sign by
//!   axis-lock success matrices, with CSV/JSON artifacts.
//!
//! Every run is deterministic given its seed. See the crate examples for
//! one runnable entry point per capability.

pub mod calibration;
pub mod catalog;
pub mod compliance;
pub mod error;
pub mod geometry;
pub mod harness;
pub mod simulator;
pub mod trajectory;

pub use calibration::Calibration;
pub use catalog::Catalog;
pub use compliance::{
    equilibrate, potential_energy, reaction, Axis, AxisLaw, ComplianceState, Equilibrator,
    FingerCompliance, MagnetCurve, Solution, Wrench,
};
pub use error::{CatalogError, GeometryError, SolveError, TrialError};
pub use geometry::{
    contains_at, contact_set, geometric_yaw_limit, ContactPoint, ContactSet, CrossSection,
    Footprint, PlanarPose, SiteSense, TargetSite, Vec2,
};
pub use harness::{
    render_matrix, run_experiment, ExperimentConfig, ExperimentReport, Scenario, SuccessMatrix,
};
pub use simulator::{
    insertability_limits, run_plunge, run_trial, InsertabilityLimits, SimTrace, TraceRecord,
    TrialOutcome, TrialSpec, TrialStatus,
};
pub use trajectory::{
    grasp_frame, press_step, spiral_point, GraspOrientation, PressController, SpiralDirection,
    SpiralParams,
};
