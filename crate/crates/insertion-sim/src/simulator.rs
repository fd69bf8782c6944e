//! Quasi-static trial execution: commanded hand motion per step, object
//! placement from the compliance equilibrium, success/failure detection,
//! and full trace capture.
//!
//! One trial is strictly sequential (the press regulator and Coulomb drag
//! feed back the previous step); independent trials share only immutable
//! catalogs and calibration and may run in parallel.

use crate::calibration::Calibration;
use crate::catalog::Catalog;
use crate::compliance::{
    ComplianceState, Drag, Equilibrator, FingerCompliance, Scene, StepContext, Wrench,
};
use crate::error::{SolveError, TrialError};
use crate::geometry::{clears_boundary, CrossSection, PlanarPose, SiteSense, TargetSite, Vec2};
use crate::trajectory::{
    grasp_frame, press_step, spiral_point, GraspOrientation, PressController, SpiralParams,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::io::Write;

/// Hand starts this far above the entry plane.
const APPROACH_HEIGHT: f64 = 5.0;
/// Descent per step while seeking first contact, mm.
const APPROACH_RATE: f64 = 0.2;
/// Vertical force that ends the approach phase, N.
const CONTACT_THRESHOLD: f64 = 0.5;
const APPROACH_MAX_STEPS: usize = 400;
/// Inner force-servo corrections per control step.
const PRESS_SERVO_ITERATIONS: usize = 8;
/// Margin below the success plane that counts as descended past it, mm.
const SUCCESS_DEPTH_EPS: f64 = 0.05;
/// Boundary slack for success containment: a seated object is pressed into
/// the walls by up to the allowed penetration, so the strict query never
/// holds; this stays at the penetration scale.
const SUCCESS_BOUNDARY_SLACK: f64 = 0.06;
/// Step budget for straight plunges (no spiral).
const PLUNGE_STEPS: usize = 800;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TrialStatus {
    Success,
    NoInsertion,
    Dropped,
    ForceAbort,
    NumericalFailure,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Approach,
    Search,
}

/// One experiment cell: object, site, signed initial offsets, axis locks,
/// and controller parameters.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrialSpec {
    pub object: String,
    pub site: String,
    /// Signed initial offsets: x mm, y mm, yaw degrees.
    pub offsets: [f64; 3],
    /// Lock flags in axis order x, y, z, yaw.
    pub axis_locks: [bool; 4],
    /// Spiral shape; its x/y offsets are overwritten by the (jittered)
    /// trial offsets at run time.
    pub spiral: SpiralParams,
    pub press: PressController,
    pub orientation: GraspOrientation,
    pub seed: u64,
    /// Normal jitter std-dev applied to the initial offsets: mm, degrees.
    pub jitter: [f64; 2],
    /// Spiral sweep step count.
    pub steps: usize,
}

impl TrialSpec {
    pub fn validate(&self) -> Result<(), TrialError> {
        if self.offsets[0].abs() > 20.0 || self.offsets[1].abs() > 20.0 {
            return Err(TrialError::InvalidSpec(format!(
                "lateral offsets must stay within +/-20 mm, got {:?}",
                self.offsets
            )));
        }
        if self.offsets[2].abs() > 30.0 {
            return Err(TrialError::InvalidSpec(format!(
                "yaw offset must stay within +/-30 degrees, got {}",
                self.offsets[2]
            )));
        }
        self.spiral.validate().map_err(TrialError::InvalidSpec)?;
        if self.steps < 10 {
            return Err(TrialError::InvalidSpec("steps must be at least 10".into()));
        }
        if !(self.press.target_force > 0.0 && self.press.gain > 0.0) {
            return Err(TrialError::InvalidSpec(
                "press target force and gain must be positive".into(),
            ));
        }
        if self.jitter[0] < 0.0 || self.jitter[1] < 0.0 {
            return Err(TrialError::InvalidSpec("jitter must be nonnegative".into()));
        }
        Ok(())
    }
}

/// Per-step trace record. `fz` is the net vertical contact force on the
/// object; `caught` counts hooked rim-catch points.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub t: f64,
    pub hand: PlanarPose,
    pub object: PlanarPose,
    pub state: ComplianceState,
    pub contacts: usize,
    pub net: Wrench,
    pub caught: usize,
    pub phase: Phase,
    pub residual: f64,
    pub max_penetration: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SimTrace {
    pub records: Vec<TraceRecord>,
}

impl SimTrace {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Writes the trace as CSV (one row per step).
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(
            w,
            "t,hand_x,hand_y,hand_z,hand_yaw,obj_x,obj_y,obj_z,obj_yaw,dx,dy,dz,dyaw,n_contacts,fz,phase,n_caught"
        )?;
        for r in &self.records {
            writeln!(
                w,
                "{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{},{:.6},{},{}",
                r.t,
                r.hand.x,
                r.hand.y,
                r.hand.z,
                r.hand.yaw,
                r.object.x,
                r.object.y,
                r.object.z,
                r.object.yaw,
                r.state.dx,
                r.state.dy,
                r.state.dz,
                r.state.dyaw,
                r.contacts,
                r.net.fz,
                match r.phase {
                    Phase::Approach => "approach",
                    Phase::Search => "search",
                },
                r.caught,
            )?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrialOutcome {
    pub status: TrialStatus,
    /// Unit time at which the success predicate first held.
    pub success_time: Option<f64>,
    /// Largest vertical contact force seen during the trial, N.
    pub max_force: f64,
    pub trace: SimTrace,
}

impl TrialOutcome {
    pub fn succeeded(&self) -> bool {
        self.status == TrialStatus::Success
    }
}

/// Runs one spiral-search insertion trial. Deterministic given the spec,
/// including its seed.
pub fn run_trial(
    cal: &Calibration,
    catalog: &Catalog,
    spec: &TrialSpec,
) -> Result<TrialOutcome, TrialError> {
    spec.validate()?;
    let object = catalog.object(&spec.object)?.clone();
    let site = catalog.site(&spec.site)?.clone();

    let mut offsets = spec.offsets;
    if spec.jitter[0] > 0.0 || spec.jitter[1] > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        let draws = gaussian_triplet(&mut rng);
        offsets[0] += draws[0] * spec.jitter[0];
        offsets[1] += draws[1] * spec.jitter[0];
        offsets[2] += draws[2] * spec.jitter[1];
    }

    let mut spiral = spec.spiral;
    spiral.x_offset = offsets[0];
    spiral.y_offset = offsets[1];

    let bias = grasp_frame(spec.orientation, cal.limits.stage_mass);
    let compliance = FingerCompliance::from_calibration(cal, spec.axis_locks, bias);

    let plan = MotionPlan {
        spiral: Some(spiral),
        press: spec.press,
        steps: spec.steps,
        yaw: offsets[2],
    };
    Ok(run_loop(cal, &object, &site, &compliance, &plan))
}

/// Straight vertical plunge of a centered, yaw-rotated object under press
/// control: the insertion-limit protocol. No spiral, no lateral offset.
pub fn run_plunge(
    cal: &Calibration,
    object: &CrossSection,
    site: &TargetSite,
    yaw: f64,
    compliance: &FingerCompliance,
    press: &PressController,
) -> TrialOutcome {
    let plan = MotionPlan {
        spiral: None,
        press: *press,
        steps: PLUNGE_STEPS,
        yaw,
    };
    run_loop(cal, object, site, compliance, &plan)
}

/// Insertion-limit yaw angles for a centered object, swept at one-degree
/// resolution from zero: the largest consecutive-success angle with the
/// compliance active, and the purely geometric (rigid) limit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct InsertabilityLimits {
    pub geometric_deg: u32,
    pub compliant_deg: u32,
}

pub fn insertability_limits(
    cal: &Calibration,
    object: &CrossSection,
    site: &TargetSite,
    press: &PressController,
) -> InsertabilityLimits {
    let geometric_deg = crate::geometry::geometric_yaw_limit(object, site);
    let compliance = FingerCompliance::unlocked(cal);
    let mut compliant_deg = None;
    for deg in 0..=25u32 {
        let outcome = run_plunge(cal, object, site, deg as f64, &compliance, press);
        if outcome.succeeded() {
            compliant_deg = Some(deg);
        } else {
            break;
        }
    }
    InsertabilityLimits {
        geometric_deg,
        compliant_deg: compliant_deg.unwrap_or(0),
    }
}

// ---------------------------------------------------------------------------
// Stepping loop
// ---------------------------------------------------------------------------

struct MotionPlan {
    /// `None` plunges straight down at the offset point.
    spiral: Option<SpiralParams>,
    press: PressController,
    steps: usize,
    yaw: f64,
}

impl MotionPlan {
    fn xy_at(&self, t: f64) -> (f64, f64) {
        match &self.spiral {
            Some(sp) => spiral_point(t, sp).expect("t stays within the sweep"),
            None => (0.0, 0.0),
        }
    }

    fn duration(&self) -> f64 {
        self.spiral.as_ref().map_or(1.0, |sp| sp.duration)
    }
}

fn run_loop(
    cal: &Calibration,
    object: &CrossSection,
    site: &TargetSite,
    compliance: &FingerCompliance,
    plan: &MotionPlan,
) -> TrialOutcome {
    let eq = Equilibrator::from_calibration(cal);
    let scene = Scene::new(object, site, cal.solver.sample_spacing);
    let is_rim = site.sense == SiteSense::Rim;
    let mut ctx = StepContext {
        drag: None,
        caught: if is_rim {
            vec![false; scene.catch_points.len()]
        } else {
            Vec::new()
        },
    };

    let (x0, y0) = plan.xy_at(0.0);
    let mut hand = PlanarPose::new(x0, y0, site.entry_height() + APPROACH_HEIGHT, plan.yaw)
        .expect("finite start pose");
    let mut warm = ComplianceState::ZERO;
    let mut trace = SimTrace::default();
    let mut max_force: f64 = 0.0;
    let mut phase = Phase::Approach;
    let mut approach_steps = 0usize;
    let mut search_step = 0usize;
    let mut t = 0.0;
    let mut z_history: Vec<f64> = Vec::new();

    let status = loop {
        let mut sol = match eq.solve_scene(compliance, &hand, &scene, &ctx, &warm) {
            Ok(sol) => sol,
            Err(SolveError::Dropped { .. }) => break TrialStatus::Dropped,
            Err(e @ SolveError::NonConvergence { .. }) => {
                if std::env::var_os("INSERTION_SIM_DEBUG").is_some() {
                    eprintln!(
                        "nonconvergence: {e}\n hand {hand:?}\n warm {warm:?}\n drag {:?}\n t {t}",
                        ctx.drag
                    );
                }
                break TrialStatus::NumericalFailure;
            }
        };

        if phase == Phase::Approach && sol.net_contact.fz > CONTACT_THRESHOLD {
            phase = Phase::Search;
        }

        // Inner force servo: the height command tracks the press target
        // within the step, emulating the fast force-maintenance loop that
        // runs underneath the sweep. Each correction obeys the per-step
        // clamp; the iteration count bounds the total height change.
        if phase == Phase::Search {
            for _ in 0..PRESS_SERVO_ITERATIONS {
                warm = sol.state;
                let dz = press_step(sol.net_contact.fz, &plan.press);
                if dz.abs() < 1e-4 {
                    break;
                }
                hand = with_z(&hand, hand.z + dz);
                sol = match eq.solve_scene(compliance, &hand, &scene, &ctx, &warm) {
                    Ok(sol) => sol,
                    Err(SolveError::Dropped { .. }) => break,
                    Err(SolveError::NonConvergence { .. }) => break,
                };
            }
        }
        let fz = sol.net_contact.fz;
        max_force = max_force.max(fz);

        if is_rim {
            update_catches(&mut ctx.caught, &scene, &sol.object_pose, site, cal);
        }

        trace.records.push(TraceRecord {
            t,
            hand,
            object: sol.object_pose,
            state: sol.state,
            contacts: sol.contact_count,
            net: sol.net_contact,
            caught: ctx.caught.iter().filter(|c| **c).count(),
            phase,
            residual: sol.residual,
            max_penetration: sol.max_penetration,
        });

        if success_reached(object, site, &sol.object_pose, &ctx.caught) {
            return TrialOutcome {
                status: TrialStatus::Success,
                success_time: Some(t),
                max_force,
                trace,
            };
        }
        if fz > cal.limits.abort_force {
            break TrialStatus::ForceAbort;
        }

        // Feedback for the next step.
        warm = sol.state;
        ctx.drag = Some(Drag {
            prev_xy: Vec2::new(sol.object_pose.x, sol.object_pose.y),
            prev_yaw: sol.object_pose.yaw_rad(),
            normal_load: fz.max(0.0),
            mu: cal.friction.mu,
            rotational_radius: cal.friction.rotational_radius,
            smoothing: cal.friction.smoothing,
        });

        match phase {
            Phase::Approach => {
                approach_steps += 1;
                if approach_steps > APPROACH_MAX_STEPS {
                    break TrialStatus::NoInsertion;
                }
                hand = with_z(&hand, hand.z - APPROACH_RATE);
            }
            Phase::Search => {
                search_step += 1;
                if search_step > plan.steps {
                    break TrialStatus::NoInsertion;
                }
                t = plan.duration() * search_step as f64 / plan.steps as f64;
                let (x, y) = plan.xy_at(t);
                hand = PlanarPose::new(x, y, hand.z, hand.yaw).expect("finite pose");

                // Plunges stall detectably once the press saturates against
                // a blocked descent; cut them short.
                if plan.spiral.is_none() {
                    z_history.push(hand.z);
                    let n = z_history.len();
                    if n > 120 && (z_history[n - 1] - z_history[n - 101]).abs() < 1e-3 {
                        break TrialStatus::NoInsertion;
                    }
                }
            }
        }
    };

    TrialOutcome {
        status,
        success_time: None,
        max_force,
        trace,
    }
}

fn with_z(pose: &PlanarPose, z: f64) -> PlanarPose {
    PlanarPose::new(pose.x, pose.y, z, pose.yaw).expect("finite pose")
}

/// Success predicate: the object bottom has descended past the success plane
/// (below the chamfer for holes, below the rim top for lids), the footprint
/// clears the nominal boundary, and for rims every catch point has hooked.
fn success_reached(
    object: &CrossSection,
    site: &TargetSite,
    pose: &PlanarPose,
    caught: &[bool],
) -> bool {
    if pose.z > site.success_height() - SUCCESS_DEPTH_EPS {
        return false;
    }
    if site.sense == SiteSense::Rim && !caught.iter().all(|c| *c) {
        return false;
    }
    clears_boundary(object, site, pose, SUCCESS_BOUNDARY_SLACK).unwrap_or(false)
}

/// Arms a catch point when the lid is pressed near the body top and that
/// point clears the body outline; releases it when the lateral constraint
/// force exceeds the break threshold (the hook slips back over the top).
fn update_catches(
    caught: &mut [bool],
    scene: &Scene,
    pose: &PlanarPose,
    site: &TargetSite,
    cal: &Calibration,
) {
    let near_top = pose.z <= site.entry_height() + cal.catch.band;
    for (flag, p) in caught.iter_mut().zip(&scene.catch_points) {
        let q = pose.apply(*p);
        let (u, _) = site.lateral_coord(q);
        if *flag {
            let force = cal.solver.contact_stiffness * u.max(0.0);
            if force > cal.catch.break_force {
                *flag = false;
            }
        } else if near_top && u < 0.0 {
            *flag = true;
        }
    }
}

fn gaussian_triplet(rng: &mut ChaCha8Rng) -> [f64; 3] {
    let mut pair = || {
        let u1: f64 = 1.0 - rng.gen::<f64>();
        let u2: f64 = rng.gen();
        let r = (-2.0 * u1.ln()).sqrt();
        let a = std::f64::consts::TAU * u2;
        (r * a.cos(), r * a.sin())
    };
    let (a, b) = pair();
    let (c, _) = pair();
    [a, b, c]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trajectory::SpiralDirection;

    fn cal() -> Calibration {
        Calibration::shipped()
    }

    fn square_spec(offsets: [f64; 3], locks: [bool; 4]) -> TrialSpec {
        TrialSpec {
            object: "square_prism".into(),
            site: "square_base".into(),
            offsets,
            axis_locks: locks,
            spiral: SpiralParams {
                r_start: 5.0,
                r_end: 18.0,
                laps: 12,
                duration: 1.0,
                x_offset: 0.0,
                y_offset: 0.0,
                direction: SpiralDirection::Ccw,
                z_ref: 20.0,
            },
            press: PressController::new(11.0),
            orientation: GraspOrientation::Vertical,
            seed: 0,
            jitter: [0.0, 0.0],
            steps: 2000,
        }
    }

    #[test]
    fn spec_validation_rejects_bad_offsets() {
        let spec = square_spec([25.0, 0.0, 0.0], [false; 4]);
        assert!(spec.validate().is_err());
        let spec = square_spec([0.0, 0.0, 35.0], [false; 4]);
        assert!(spec.validate().is_err());
    }

    #[test]
    fn aligned_insertion_succeeds() {
        let cal = cal();
        let catalog = Catalog::shipped();
        let spec = square_spec([0.0, 0.0, 0.0], [false; 4]);
        let outcome = run_trial(&cal, &catalog, &spec).unwrap();
        assert_eq!(outcome.status, TrialStatus::Success, "{:?}", outcome.status);
        assert!(outcome.success_time.is_some());
    }

    #[test]
    fn trace_times_strictly_increase_in_search() {
        let cal = cal();
        let catalog = Catalog::shipped();
        let spec = square_spec([2.0, 0.0, 0.0], [false; 4]);
        let outcome = run_trial(&cal, &catalog, &spec).unwrap();
        let search: Vec<_> = outcome
            .trace
            .records
            .iter()
            .filter(|r| r.phase == Phase::Search)
            .collect();
        for w in search.windows(2) {
            assert!(w[1].t > w[0].t);
        }
    }

    #[test]
    fn deterministic_given_spec() {
        let cal = cal();
        let catalog = Catalog::shipped();
        let spec = square_spec([4.0, -4.0, 8.0], [false; 4]);
        let a = run_trial(&cal, &catalog, &spec).unwrap();
        let b = run_trial(&cal, &catalog, &spec).unwrap();
        assert_eq!(a.status, b.status);
        assert_eq!(a.trace, b.trace);
    }

    #[test]
    fn plunge_square_aligned_true_and_45_false() {
        let cal = cal();
        let catalog = Catalog::shipped();
        let (obj, site) = catalog.pair("square").unwrap();
        let press = PressController::new(11.0);
        let stage = FingerCompliance::unlocked(&cal);
        assert!(run_plunge(&cal, obj, site, 0.0, &stage, &press).succeeded());
        assert!(!run_plunge(&cal, obj, site, 45.0, &stage, &press).succeeded());
    }

    #[test]
    fn unknown_catalog_names_are_errors() {
        let cal = cal();
        let catalog = Catalog::shipped();
        let mut spec = square_spec([0.0, 0.0, 0.0], [false; 4]);
        spec.object = "hexagon".into();
        assert!(run_trial(&cal, &catalog, &spec).is_err());
    }
}
