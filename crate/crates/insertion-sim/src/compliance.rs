//! Passive finger compliance: per-axis force laws, potential energy, and the
//! quasi-static equilibrium solve that places the grasped object within the
//! finger's adaptive travel under contact loads.
//!
//! The two physical fingers are lumped into one four-axis stage between hand
//! frame and object. Displacements are x/y/z in mm plus yaw; yaw is reported
//! in degrees but all energy integrals run over radians so that energies are
//! in mJ (N*mm) and generalized forces are N and N*mm.
//!
//! One twist worth spelling out: when the yaw bearing is locked but the x
//! slides are free, the object can still rotate in the hand because the two
//! x slides can move differentially. That path is modelled as the x-axis law
//! acting at a grip-radius lever. Only locking both x and yaw makes the
//! object rotationally rigid.

use crate::calibration::Calibration;
use crate::error::SolveError;
use crate::geometry::{CrossSection, PlanarPose, TargetSite, Vec2};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Axis {
    X,
    Y,
    Z,
    Yaw,
}

impl Axis {
    pub const ALL: [Axis; 4] = [Axis::X, Axis::Y, Axis::Z, Axis::Yaw];

    pub fn index(self) -> usize {
        match self {
            Axis::X => 0,
            Axis::Y => 1,
            Axis::Z => 2,
            Axis::Yaw => 3,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Axis::X => "x",
            Axis::Y => "y",
            Axis::Z => "z",
            Axis::Yaw => "yaw",
        }
    }
}

// ---------------------------------------------------------------------------
// Force laws
// ---------------------------------------------------------------------------

/// Odd detent curve `F(s) = peak * (s/p) * exp((1 - (s/p)^2) / 2)`.
///
/// The restoring force rises to `peak` exactly at displacement `p`, dips as
/// the magnets separate, never reverses sign, and is negligible a few `p`
/// out (below 1% of peak at 4 p). Both the x-slide detent and the yaw
/// bearing detent share this family; the energy integral is closed-form.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MagnetCurve {
    peak: f64,
    peak_at: f64,
}

impl MagnetCurve {
    /// Builds the curve from its peak value and peak location, derated by
    /// the installed gap through a `(gap_ref / gap)^exponent` power law.
    pub fn from_peak(peak: f64, peak_at: f64, gap: f64, gap_reference: f64, exponent: f64) -> Self {
        let derate = (gap_reference / gap).powf(exponent);
        MagnetCurve {
            peak: peak * derate,
            peak_at,
        }
    }

    pub fn force(&self, s: f64) -> f64 {
        let v = s / self.peak_at;
        self.peak * v * (0.5 * (1.0 - v * v)).exp()
    }

    /// Integral of `force` from 0 to `s` over the same unit as `s`.
    pub fn energy(&self, s: f64) -> f64 {
        let v = s / self.peak_at;
        self.peak * self.peak_at * (0.5f64.exp() - (0.5 * (1.0 - v * v)).exp())
    }

    pub fn stiffness(&self, s: f64) -> f64 {
        let v = s / self.peak_at;
        self.peak / self.peak_at * (1.0 - v * v) * (0.5 * (1.0 - v * v)).exp()
    }

    pub fn peak_force(&self) -> f64 {
        self.peak
    }
}

/// In-travel force-displacement shape of one axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum LawShape {
    /// Plain linear spring (z slide), N/mm.
    Spring { k: f64 },
    /// Soft follow-up spring up to the knee, stiff main spring beyond
    /// (y slide); force is continuous at the knee by construction.
    TwoStageSpring { k_soft: f64, k_main: f64, knee: f64 },
    /// Opposed-magnet detent plus a push spring engaging at `engage` mm
    /// (x slide).
    MagnetDetent {
        magnet: MagnetCurve,
        k_push: f64,
        engage: f64,
    },
    /// Magnet detent on the yaw bearing: torque rises to a peak at
    /// `peak_angle` degrees then declines toward the travel end.
    /// `tau(t) = peak * (t/p) * exp((1 - (t/p)^2)/2)`, N*mm over degrees.
    MagnetTorque { peak_torque: f64, peak_angle: f64 },
}

impl LawShape {
    fn force(&self, s: f64) -> f64 {
        match *self {
            LawShape::Spring { k } => k * s,
            LawShape::TwoStageSpring { k_soft, k_main, knee } => {
                if s.abs() <= knee {
                    k_soft * s
                } else {
                    s.signum() * (k_soft * knee + k_main * (s.abs() - knee))
                }
            }
            LawShape::MagnetDetent { magnet, k_push, engage } => {
                let spring = if s.abs() > engage {
                    s.signum() * k_push * (s.abs() - engage)
                } else {
                    0.0
                };
                magnet.force(s) + spring
            }
            LawShape::MagnetTorque { peak_torque, peak_angle } => {
                let v = s / peak_angle;
                peak_torque * v * (0.5 * (1.0 - v * v)).exp()
            }
        }
    }

    /// Exact integral of `force` from 0 to `s`, over radians for the torque
    /// shape so the result is mJ in every case.
    fn energy(&self, s: f64) -> f64 {
        match *self {
            LawShape::Spring { k } => 0.5 * k * s * s,
            LawShape::TwoStageSpring { k_soft, k_main, knee } => {
                let a = s.abs();
                if a <= knee {
                    0.5 * k_soft * a * a
                } else {
                    0.5 * k_soft * knee * knee
                        + k_soft * knee * (a - knee)
                        + 0.5 * k_main * (a - knee) * (a - knee)
                }
            }
            LawShape::MagnetDetent { magnet, k_push, engage } => {
                let a = s.abs();
                let spring = if a > engage {
                    0.5 * k_push * (a - engage) * (a - engage)
                } else {
                    0.0
                };
                magnet.energy(s) + spring
            }
            LawShape::MagnetTorque { peak_torque, peak_angle } => {
                let v = s / peak_angle;
                let half = 0.5f64;
                peak_angle.to_radians()
                    * peak_torque
                    * (half.exp() - (0.5 * (1.0 - v * v)).exp())
            }
        }
    }

    fn stiffness(&self, s: f64) -> f64 {
        match *self {
            LawShape::Spring { k } => k,
            LawShape::TwoStageSpring { k_soft, k_main, knee } => {
                if s.abs() <= knee {
                    k_soft
                } else {
                    k_main
                }
            }
            LawShape::MagnetDetent { magnet, k_push, engage } => {
                let spring = if s.abs() > engage { k_push } else { 0.0 };
                magnet.stiffness(s) + spring
            }
            LawShape::MagnetTorque { peak_torque, peak_angle } => {
                let v = s / peak_angle;
                peak_torque / peak_angle * (1.0 - v * v) * (0.5 * (1.0 - v * v)).exp()
            }
        }
    }
}

/// One axis: in-travel shape plus a stiff penalty beyond the travel limit.
///
/// Displacement units are mm (linear axes) or degrees (yaw). Forces are N for
/// linear axes and N*mm for yaw. For yaw, `hard_stop` is already converted to
/// N*mm per radian.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AxisLaw {
    pub axis: Axis,
    pub shape: LawShape,
    pub travel: f64,
    pub hard_stop: f64,
}

impl AxisLaw {
    /// Reaction force (N) or torque (N*mm) at displacement `s` (mm or deg).
    /// Total function: defined for every finite input.
    pub fn reaction(&self, s: f64) -> f64 {
        let excess = (s.abs() - self.travel).max(0.0);
        let stop = match self.axis {
            Axis::Yaw => s.signum() * self.hard_stop * excess.to_radians(),
            _ => s.signum() * self.hard_stop * excess,
        };
        self.shape.force(s) + stop
    }

    /// Exact energy integral of `reaction` from 0 to `s`, in mJ.
    pub fn energy(&self, s: f64) -> f64 {
        let excess = (s.abs() - self.travel).max(0.0);
        let stop = match self.axis {
            Axis::Yaw => {
                let e = excess.to_radians();
                0.5 * self.hard_stop * e * e
            }
            _ => 0.5 * self.hard_stop * excess * excess,
        };
        self.shape.energy(s) + stop
    }

    /// Tangent stiffness in the solver's working units (per mm, or per radian
    /// for yaw).
    fn tangent_stiffness(&self, s: f64) -> f64 {
        let base = self.shape.stiffness(s);
        let stop = if s.abs() > self.travel {
            self.hard_stop
        } else {
            0.0
        };
        match self.axis {
            // shape stiffness is N*mm/deg; convert to N*mm/rad.
            Axis::Yaw => base.to_degrees() + stop,
            _ => base + stop,
        }
    }
}

/// Spec-level free function mirroring `AxisLaw::reaction`.
pub fn reaction(law: &AxisLaw, s: f64) -> f64 {
    law.reaction(s)
}

// ---------------------------------------------------------------------------
// Finger compliance
// ---------------------------------------------------------------------------

/// External force/torque pair acting on the passive stage, in the hand frame.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Wrench {
    pub fx: f64,
    pub fy: f64,
    pub fz: f64,
    /// Torque about the vertical axis, N*mm.
    pub tau: f64,
}

/// Per-axis lock flags; a locked slide is mechanically rigid.
pub type AxisLocks = [bool; 4];

#[derive(Debug, Clone)]
pub struct FingerCompliance {
    pub laws: [AxisLaw; 4],
    pub locks: AxisLocks,
    pub gravity_bias: Wrench,
    /// Lever arm converting differential x slide into object rotation, mm.
    pub grip_radius: f64,
    pub pseudo_yaw_factor: f64,
    /// Penalty stiffness representing a locked axis in `potential_energy`.
    pub locked_stiffness: f64,
    pub drop_margin: f64,
}

/// How the object may rotate relative to the hand, given the lock pattern.
#[derive(Debug, Clone, Copy, PartialEq)]
enum YawPath {
    /// Yaw bearing free: the bearing detent governs.
    Bearing,
    /// Bearing locked, x slides free: rotation through differential x.
    Leveraged,
    /// Both locked: rotationally rigid.
    Rigid,
}

impl FingerCompliance {
    pub fn from_calibration(cal: &Calibration, locks: AxisLocks, gravity_bias: Wrench) -> Self {
        let pf = cal.coupling.parallel_factor;
        let x_magnet = MagnetCurve::from_peak(
            cal.magnet_x.peak_force * pf,
            cal.magnet_x.shape,
            cal.magnet_x.gap,
            cal.magnet_x.gap_reference,
            cal.magnet_x.gap_exponent,
        );
        let yaw_derate =
            (cal.magnet_yaw.gap_reference / cal.magnet_yaw.gap).powf(cal.magnet_yaw.gap_exponent);
        let r = cal.coupling.grip_radius;
        let laws = [
            AxisLaw {
                axis: Axis::X,
                shape: LawShape::MagnetDetent {
                    magnet: x_magnet,
                    k_push: cal.springs.x_push * pf,
                    engage: cal.springs.x_engage,
                },
                travel: cal.travel.x,
                hard_stop: cal.solver.hard_stop_stiffness,
            },
            AxisLaw {
                axis: Axis::Y,
                shape: LawShape::TwoStageSpring {
                    k_soft: cal.springs.y_follow * pf,
                    k_main: cal.springs.y_main * pf,
                    knee: cal.springs.y_knee,
                },
                travel: cal.travel.y,
                hard_stop: cal.solver.hard_stop_stiffness,
            },
            AxisLaw {
                axis: Axis::Z,
                shape: LawShape::Spring {
                    k: cal.springs.z * pf,
                },
                travel: cal.travel.z,
                hard_stop: cal.solver.hard_stop_stiffness,
            },
            AxisLaw {
                axis: Axis::Yaw,
                shape: LawShape::MagnetTorque {
                    peak_torque: cal.magnet_yaw.peak_torque * pf * yaw_derate,
                    peak_angle: cal.magnet_yaw.peak_angle,
                },
                travel: cal.travel.yaw,
                hard_stop: cal.solver.hard_stop_stiffness * r * r,
            },
        ];
        FingerCompliance {
            laws,
            locks,
            gravity_bias,
            grip_radius: cal.coupling.grip_radius,
            pseudo_yaw_factor: cal.coupling.pseudo_yaw_factor,
            locked_stiffness: cal.solver.hard_stop_stiffness,
            drop_margin: cal.solver.drop_margin,
        }
    }

    pub fn unlocked(cal: &Calibration) -> Self {
        Self::from_calibration(cal, [false; 4], Wrench::default())
    }

    pub fn law(&self, axis: Axis) -> &AxisLaw {
        &self.laws[axis.index()]
    }

    pub fn locked(&self, axis: Axis) -> bool {
        self.locks[axis.index()]
    }

    fn yaw_path(&self) -> YawPath {
        match (self.locked(Axis::Yaw), self.locked(Axis::X)) {
            (false, _) => YawPath::Bearing,
            (true, false) => YawPath::Leveraged,
            (true, true) => YawPath::Rigid,
        }
    }

    /// Torque resisting object rotation `theta` (radians) relative to the
    /// hand, along whichever rotational path the lock pattern leaves open.
    fn yaw_torque(&self, theta_rad: f64) -> f64 {
        match self.yaw_path() {
            YawPath::Bearing => self.law(Axis::Yaw).reaction(theta_rad.to_degrees()),
            YawPath::Leveraged => {
                let r = self.grip_radius;
                self.pseudo_yaw_factor * r * self.law(Axis::X).reaction(r * theta_rad)
            }
            YawPath::Rigid => 0.0,
        }
    }

    fn yaw_energy(&self, theta_rad: f64) -> f64 {
        match self.yaw_path() {
            YawPath::Bearing => self.law(Axis::Yaw).energy(theta_rad.to_degrees()),
            YawPath::Leveraged => {
                self.pseudo_yaw_factor * self.law(Axis::X).energy(self.grip_radius * theta_rad)
            }
            YawPath::Rigid => 0.0,
        }
    }

    fn yaw_stiffness(&self, theta_rad: f64) -> f64 {
        match self.yaw_path() {
            YawPath::Bearing => self.law(Axis::Yaw).tangent_stiffness(theta_rad.to_degrees()),
            YawPath::Leveraged => {
                let r = self.grip_radius;
                self.pseudo_yaw_factor
                    * r
                    * r
                    * self.law(Axis::X).tangent_stiffness(r * theta_rad)
            }
            YawPath::Rigid => 0.0,
        }
    }

    /// Whether the yaw coordinate can move at all.
    fn yaw_active(&self) -> bool {
        self.yaw_path() != YawPath::Rigid
    }

    /// Drop-band travel bound per state coordinate (mm / deg).
    fn drop_bound(&self, axis: Axis) -> f64 {
        let travel = match (axis, self.yaw_path()) {
            (Axis::Yaw, YawPath::Leveraged) => {
                (self.law(Axis::X).travel / self.grip_radius).to_degrees()
            }
            _ => self.law(axis).travel,
        };
        travel + self.drop_margin
    }
}

/// Displacement of the grasped object relative to the hand frame:
/// mm for dx/dy/dz, degrees for dyaw.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ComplianceState {
    pub dx: f64,
    pub dy: f64,
    pub dz: f64,
    pub dyaw: f64,
}

impl ComplianceState {
    pub const ZERO: ComplianceState = ComplianceState {
        dx: 0.0,
        dy: 0.0,
        dz: 0.0,
        dyaw: 0.0,
    };

    fn to_raw(self) -> [f64; 4] {
        [self.dx, self.dy, self.dz, self.dyaw.to_radians()]
    }

    fn from_raw(raw: [f64; 4]) -> Self {
        ComplianceState {
            dx: raw[0],
            dy: raw[1],
            dz: raw[2],
            dyaw: raw[3].to_degrees(),
        }
    }
}

/// Stored elastic energy of the stage at `state`, in mJ.
///
/// Sum over axes of the exact integral of the reaction law, hard-stop penalty
/// included. A locked axis held away from zero contributes a stiff quadratic
/// penalty instead (the equilibrium solve itself keeps locked axes at zero
/// exactly). With the yaw bearing locked but x free, the rotational term is
/// the leveraged-x energy.
pub fn potential_energy(compliance: &FingerCompliance, state: &ComplianceState) -> f64 {
    let mut total = 0.0;
    for axis in [Axis::X, Axis::Y, Axis::Z] {
        let s = match axis {
            Axis::X => state.dx,
            Axis::Y => state.dy,
            _ => state.dz,
        };
        total += if compliance.locked(axis) {
            0.5 * compliance.locked_stiffness * s * s
        } else {
            compliance.law(axis).energy(s)
        };
    }
    let theta = state.dyaw.to_radians();
    total += if compliance.yaw_active() {
        compliance.yaw_energy(theta)
    } else {
        let k = compliance.locked_stiffness * compliance.grip_radius * compliance.grip_radius;
        0.5 * k * theta * theta
    };
    total
}

// ---------------------------------------------------------------------------
// Equilibrium solve
// ---------------------------------------------------------------------------

/// Immutable per-trial contact scene: the object boundary samples and catch
/// points are fixed in the object frame.
#[derive(Debug, Clone)]
pub struct Scene {
    pub object: CrossSection,
    pub site: TargetSite,
    pub samples: Vec<Vec2>,
    pub catch_points: Vec<Vec2>,
}

impl Scene {
    pub fn new(object: &CrossSection, site: &TargetSite, sample_spacing: f64) -> Self {
        Scene {
            object: object.clone(),
            site: site.clone(),
            samples: object.boundary_samples(sample_spacing),
            catch_points: object.catch_points(),
        }
    }
}

/// History-dependent inputs owned by the stepping loop: Coulomb drag against
/// the previous object placement and the set of hooked rim-catch points.
#[derive(Debug, Clone, Default)]
pub struct StepContext {
    pub drag: Option<Drag>,
    /// Flags parallel to `Scene::catch_points`; a hooked point is penalized
    /// for re-entering the body region.
    pub caught: Vec<bool>,
}

#[derive(Debug, Clone, Copy)]
pub struct Drag {
    /// Object center position at the previous step (site frame).
    pub prev_xy: Vec2,
    /// Object yaw at the previous step, radians.
    pub prev_yaw: f64,
    /// Normal load carried at the previous step, N.
    pub normal_load: f64,
    pub mu: f64,
    pub rotational_radius: f64,
    pub smoothing: f64,
}

/// Result of one equilibrium solve.
#[derive(Debug, Clone)]
pub struct Solution {
    pub state: ComplianceState,
    pub object_pose: PlanarPose,
    /// Max generalized-force residual over active coordinates (N / N*mm).
    pub residual: f64,
    pub iterations: usize,
    pub contact_count: usize,
    pub max_penetration: f64,
    /// Net contact wrench on the object about its center (N, N*mm).
    pub net_contact: Wrench,
    /// Largest lateral constraint force carried by any hooked catch point.
    pub max_catch_force: f64,
}

/// Equilibrium solver: damped projected Newton descent with backtracking on
/// the total potential (stage energy + contact penalty + drag + bias work).
#[derive(Debug, Clone)]
pub struct Equilibrator {
    pub contact_stiffness: f64,
    pub residual_tol: f64,
    pub max_iterations: usize,
    pub sample_spacing: f64,
}

impl Equilibrator {
    pub fn from_calibration(cal: &Calibration) -> Self {
        Equilibrator {
            contact_stiffness: cal.solver.contact_stiffness,
            residual_tol: cal.solver.residual_tol,
            max_iterations: cal.solver.max_iterations,
            sample_spacing: cal.solver.sample_spacing,
        }
    }

    /// Frictionless, catch-free equilibrium at a commanded hand pose.
    pub fn solve(
        &self,
        compliance: &FingerCompliance,
        hand: &PlanarPose,
        object: &CrossSection,
        site: &TargetSite,
        warm_start: &ComplianceState,
    ) -> Result<Solution, SolveError> {
        let scene = Scene::new(object, site, self.sample_spacing);
        self.solve_scene(compliance, hand, &scene, &StepContext::default(), warm_start)
    }

    /// Full solve with drag and catch context; `warm_start` must be within
    /// the travel band.
    pub fn solve_scene(
        &self,
        compliance: &FingerCompliance,
        hand: &PlanarPose,
        scene: &Scene,
        ctx: &StepContext,
        warm_start: &ComplianceState,
    ) -> Result<Solution, SolveError> {
        let active = [
            !compliance.locked(Axis::X),
            !compliance.locked(Axis::Y),
            !compliance.locked(Axis::Z),
            compliance.yaw_active(),
        ];
        let mut s = warm_start.to_raw();
        for i in 0..4 {
            if !active[i] {
                s[i] = 0.0;
            }
        }

        let mut lambda = 1e-6;
        let mut evaluated = self.assemble(compliance, hand, scene, ctx, &s, true);
        let mut iterations = 0;
        loop {
            let residual = residual_norm(&evaluated.grad, &active);
            if residual < self.residual_tol {
                return self.finish(compliance, hand, scene, ctx, s, residual, iterations);
            }
            if iterations >= self.max_iterations {
                return Err(SolveError::NonConvergence {
                    iterations,
                    residual,
                });
            }
            iterations += 1;

            let step = newton_step(&evaluated.hess, &evaluated.grad, &active, lambda);
            let mut s_new = s;
            for i in 0..4 {
                if active[i] {
                    s_new[i] += step[i];
                }
            }
            let trial = self.assemble(compliance, hand, scene, ctx, &s_new, true);
            if trial.energy.is_finite() && trial.energy <= evaluated.energy + 1e-12 {
                s = s_new;
                evaluated = trial;
                lambda = (lambda / 3.0).max(1e-9);
            } else {
                lambda = (lambda * 8.0).min(1e12);
            }
        }
    }

    fn finish(
        &self,
        compliance: &FingerCompliance,
        hand: &PlanarPose,
        scene: &Scene,
        ctx: &StepContext,
        s: [f64; 4],
        residual: f64,
        iterations: usize,
    ) -> Result<Solution, SolveError> {
        // Drop band: converged displacement must stay near the travel range.
        for axis in Axis::ALL {
            let value = match axis {
                Axis::X => s[0],
                Axis::Y => s[1],
                Axis::Z => s[2],
                Axis::Yaw => s[3].to_degrees(),
            };
            if value.abs() > compliance.drop_bound(axis) {
                return Err(SolveError::Dropped {
                    axis: axis.label(),
                    displacement: value,
                });
            }
        }
        let evaluated = self.assemble(compliance, hand, scene, ctx, &s, true);
        Ok(Solution {
            state: ComplianceState::from_raw(s),
            object_pose: object_pose(hand, &s),
            residual,
            iterations,
            contact_count: evaluated.contact_count,
            max_penetration: evaluated.max_penetration,
            net_contact: evaluated.net_contact,
            max_catch_force: evaluated.max_catch_force,
        })
    }

    /// Energy, gradient, and Gauss-Newton Hessian of the total potential at
    /// raw state `s` = [dx, dy, dz, theta_rad].
    fn assemble(
        &self,
        compliance: &FingerCompliance,
        hand: &PlanarPose,
        scene: &Scene,
        ctx: &StepContext,
        s: &[f64; 4],
        _derivs: bool,
    ) -> Assembled {
        let mut out = Assembled::default();
        let kc = self.contact_stiffness;

        // Stage energy per axis.
        let linear = [
            (0, Axis::X, s[0]),
            (1, Axis::Y, s[1]),
            (2, Axis::Z, s[2]),
        ];
        for (i, axis, v) in linear {
            if compliance.locked(axis) {
                continue;
            }
            let law = compliance.law(axis);
            out.energy += law.energy(v);
            out.grad[i] += law.reaction(v);
            out.hess[i][i] += law.tangent_stiffness(v).max(1e-6);
        }
        if compliance.yaw_active() {
            out.energy += compliance.yaw_energy(s[3]);
            out.grad[3] += compliance.yaw_torque(s[3]);
            out.hess[3][3] += compliance.yaw_stiffness(s[3]).max(1e-4);
        }

        // Gravity bias work (constant wrench on the stage).
        let b = compliance.gravity_bias;
        out.energy -= b.fx * s[0] + b.fy * s[1] + b.fz * s[2] + b.tau * s[3];
        out.grad[0] -= b.fx;
        out.grad[1] -= b.fy;
        out.grad[2] -= b.fz;
        out.grad[3] -= b.tau;

        // Contact penalties over the boundary samples.
        let pose = object_pose(hand, s);
        let psi = hand.yaw_rad();
        let (sin_h, cos_h) = psi.sin_cos();
        let ex = Vec2::new(cos_h, sin_h);
        let ey = Vec2::new(-sin_h, cos_h);
        let center = pose.translation();
        let yaw_total = pose.yaw_rad();
        let (sin_t, cos_t) = yaw_total.sin_cos();

        for p in &scene.samples {
            let q = Vec2::new(
                cos_t * p.x - sin_t * p.y + center.x,
                sin_t * p.x + cos_t * p.y + center.y,
            );
            let (u, u_dir) = scene.site.lateral_coord(q);
            let Some((pen, dir2)) = scene.site.profile_penetration(u, pose.z) else {
                continue;
            };
            out.contact_count += 1;
            out.max_penetration = out.max_penetration.max(pen);
            // 3D push-out normal: lateral part along u_dir, vertical part up.
            let n_xy = u_dir.scaled(dir2.x);
            let n_z = dir2.y;
            let arm = q - center;
            let jac = [
                n_xy.dot(ex),
                n_xy.dot(ey),
                n_z,
                n_xy.dot(Vec2::new(-arm.y, arm.x)),
            ];
            out.energy += 0.5 * kc * pen * pen;
            let f = kc * pen;
            for i in 0..4 {
                out.grad[i] -= f * jac[i];
                for j in 0..4 {
                    out.hess[i][j] += kc * jac[i] * jac[j];
                }
            }
            out.net_contact.fx += f * n_xy.x;
            out.net_contact.fy += f * n_xy.y;
            out.net_contact.fz += f * n_z;
            out.net_contact.tau += arm.cross(n_xy.scaled(f));
        }

        // Hooked catch points: penalize re-entering the body region.
        for (flag, p) in ctx.caught.iter().zip(&scene.catch_points) {
            if !flag {
                continue;
            }
            let q = Vec2::new(
                cos_t * p.x - sin_t * p.y + center.x,
                sin_t * p.x + cos_t * p.y + center.y,
            );
            let (u, u_dir) = scene.site.lateral_coord(q);
            if u <= 0.0 {
                continue;
            }
            let arm = q - center;
            let jac = [
                u_dir.dot(ex),
                u_dir.dot(ey),
                0.0,
                u_dir.dot(Vec2::new(-arm.y, arm.x)),
            ];
            out.energy += 0.5 * kc * u * u;
            let f = kc * u;
            out.max_catch_force = out.max_catch_force.max(f);
            for i in 0..4 {
                out.grad[i] += f * jac[i];
                for j in 0..4 {
                    out.hess[i][j] += kc * jac[i] * jac[j];
                }
            }
        }

        // Coulomb drag against the previous placement, smoothed so the
        // energy stays differentiable through zero slip.
        if let Some(d) = &ctx.drag {
            if d.normal_load > 0.0 && d.mu > 0.0 {
                let load = d.mu * d.normal_load;
                let delta = center - d.prev_xy;
                let eps = d.smoothing;
                let slip = (delta.dot(delta) + eps * eps).sqrt();
                out.energy += load * (slip - eps);
                let g = delta.scaled(load / slip);
                out.grad[0] += g.dot(ex);
                out.grad[1] += g.dot(ey);
                let k_t = load / slip;
                out.hess[0][0] += k_t;
                out.hess[1][1] += k_t;

                let r = d.rotational_radius;
                if r > 0.0 {
                    let dth = s[3] + psi - d.prev_yaw;
                    let eps_a = eps / r;
                    let swing = (dth * dth + eps_a * eps_a).sqrt();
                    out.energy += load * r * (swing - eps_a);
                    out.grad[3] += load * r * dth / swing;
                    out.hess[3][3] += load * r / swing;
                }
            }
        }

        out
    }
}

#[derive(Debug, Clone, Default)]
struct Assembled {
    energy: f64,
    grad: [f64; 4],
    hess: [[f64; 4]; 4],
    contact_count: usize,
    max_penetration: f64,
    net_contact: Wrench,
    max_catch_force: f64,
}

/// Object pose in the site frame given the hand pose and raw state.
pub fn object_pose(hand: &PlanarPose, s: &[f64; 4]) -> PlanarPose {
    let psi = hand.yaw_rad();
    let (sin_h, cos_h) = psi.sin_cos();
    PlanarPose::new(
        hand.x + cos_h * s[0] - sin_h * s[1],
        hand.y + sin_h * s[0] + cos_h * s[1],
        hand.z + s[2],
        hand.yaw + s[3].to_degrees(),
    )
    .expect("pose stays finite")
}

fn residual_norm(grad: &[f64; 4], active: &[bool; 4]) -> f64 {
    let mut r: f64 = 0.0;
    for i in 0..4 {
        if active[i] {
            r = r.max(grad[i].abs());
        }
    }
    r
}

/// Solves `(H + lambda * D) step = -g` on the active coordinates; `D` scales
/// the yaw coordinate so damping acts uniformly across units.
fn newton_step(hess: &[[f64; 4]; 4], grad: &[f64; 4], active: &[bool; 4], lambda: f64) -> [f64; 4] {
    let idx: Vec<usize> = (0..4).filter(|&i| active[i]).collect();
    let n = idx.len();
    let mut a = [[0.0f64; 5]; 4];
    for (r, &i) in idx.iter().enumerate() {
        for (c, &j) in idx.iter().enumerate() {
            a[r][c] = hess[i][j];
        }
        let scale = if i == 3 { 100.0 } else { 1.0 };
        a[r][r] += lambda * (scale + hess[i][i].abs());
        a[r][n] = -grad[i];
    }
    // Gaussian elimination with partial pivoting.
    for col in 0..n {
        let mut pivot = col;
        for r in (col + 1)..n {
            if a[r][col].abs() > a[pivot][col].abs() {
                pivot = r;
            }
        }
        a.swap(col, pivot);
        let p = a[col][col];
        if p.abs() < 1e-300 {
            continue;
        }
        for r in 0..n {
            if r != col {
                let factor = a[r][col] / p;
                for c in col..=n {
                    a[r][c] -= factor * a[col][c];
                }
            }
        }
    }
    let mut step = [0.0f64; 4];
    for (r, &i) in idx.iter().enumerate() {
        let p = a[r][r];
        step[i] = if p.abs() < 1e-300 { 0.0 } else { a[r][n] / p };
    }
    step
}

/// Spec-level convenience: frictionless equilibrium under the given
/// calibration's solver settings.
pub fn equilibrate(
    cal: &Calibration,
    compliance: &FingerCompliance,
    hand: &PlanarPose,
    object: &CrossSection,
    site: &TargetSite,
    warm_start: &ComplianceState,
) -> Result<ComplianceState, SolveError> {
    Equilibrator::from_calibration(cal)
        .solve(compliance, hand, object, site, warm_start)
        .map(|sol| sol.state)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::Catalog;
    use crate::geometry::{Footprint, SiteSense};

    fn cal() -> Calibration {
        Calibration::shipped()
    }

    fn stage() -> FingerCompliance {
        FingerCompliance::unlocked(&cal())
    }

    #[test]
    fn z_law_linear_region() {
        let c = stage();
        let f = c.law(Axis::Z).reaction(3.0);
        assert!((f - 0.45).abs() < 1e-12, "0.15 * 3 = 0.45, got {f}");
    }

    #[test]
    fn y_law_zero_and_knee() {
        let c = stage();
        assert_eq!(c.law(Axis::Y).reaction(0.0), 0.0);
        // 0.75 + 0.67 * 3 = 2.76 at 8 mm.
        let f = c.law(Axis::Y).reaction(8.0);
        assert!((f - 2.76).abs() < 1e-12, "got {f}");
        // Continuous at the knee.
        let below = c.law(Axis::Y).reaction(5.0 - 1e-9);
        let above = c.law(Axis::Y).reaction(5.0 + 1e-9);
        assert!((below - above).abs() < 1e-6);
    }

    #[test]
    fn laws_are_odd() {
        let c = stage();
        for axis in Axis::ALL {
            let law = c.law(axis);
            for k in 1..200 {
                let s = 0.11 * k as f64;
                let err = (law.reaction(s) + law.reaction(-s)).abs();
                assert!(err < 1e-9, "{axis:?} at {s}: {err}");
            }
        }
    }

    #[test]
    fn laws_are_continuous_at_fine_steps() {
        let c = stage();
        for axis in Axis::ALL {
            let law = c.law(axis);
            let range = law.travel;
            let step = 1e-3;
            let n = (2.0 * range / step) as usize;
            let mut prev = law.reaction(-range);
            // Continuity: neighbouring samples differ by at most the local
            // stiffness times the step, with contact-free margins.
            for k in 1..=n {
                let s = -range + step * k as f64;
                let f = law.reaction(s);
                assert!(
                    (f - prev).abs() < 1.0,
                    "{axis:?} jump at {s}: {} -> {}",
                    prev,
                    f
                );
                prev = f;
            }
        }
    }

    #[test]
    fn laws_are_restoring_with_magnet_dip_allowed() {
        let c = stage();
        for axis in Axis::ALL {
            let law = c.law(axis);
            for k in 1..2000 {
                let s = law.travel * k as f64 / 2000.0;
                let f = law.reaction(s);
                assert!(f >= 0.0, "{axis:?} reverses sign at {s}: {f}");
            }
        }
    }

    #[test]
    fn magnet_negligible_beyond_active_range() {
        let c = cal();
        let curve = MagnetCurve::from_peak(
            c.magnet_x.peak_force,
            c.magnet_x.shape,
            c.magnet_x.gap,
            c.magnet_x.gap_reference,
            c.magnet_x.gap_exponent,
        );
        let tail = curve.force(c.magnet_x.active_range).abs();
        assert!(tail <= 0.01 * curve.peak_force());
    }

    #[test]
    fn magnet_peak_decreases_with_gap() {
        let c = cal();
        let mut prev = f64::INFINITY;
        for k in 0..=10 {
            let gap = 0.5 + 2.5 * k as f64 / 10.0;
            let curve = MagnetCurve::from_peak(
                c.magnet_x.peak_force,
                c.magnet_x.shape,
                gap,
                c.magnet_x.gap_reference,
                c.magnet_x.gap_exponent,
            );
            let peak = curve.peak_force();
            assert!(peak < prev, "peak must strictly decrease with gap");
            prev = peak;
        }
    }

    #[test]
    fn yaw_torque_peaks_at_calibrated_angle() {
        let c = stage();
        let law = c.law(Axis::Yaw);
        let at_peak = law.reaction(14.0);
        for d in [10.0, 12.0, 16.0, 19.0] {
            assert!(law.reaction(d) < at_peak, "torque at {d} exceeds the peak");
        }
        // Declines toward the travel end but keeps its sign.
        assert!(law.reaction(19.9) > 0.0);
        assert!(law.reaction(19.9) < at_peak);
    }

    #[test]
    fn zero_state_zero_energy() {
        assert_eq!(potential_energy(&stage(), &ComplianceState::ZERO), 0.0);
    }

    #[test]
    fn z_spring_energy_quadratic() {
        let state = ComplianceState {
            dz: 5.0,
            ..ComplianceState::ZERO
        };
        let e = potential_energy(&stage(), &state);
        assert!((e - 1.875).abs() < 1e-12, "0.5 * 0.15 * 25 = 1.875, got {e}");
    }

    #[test]
    fn energy_matches_reaction_by_finite_differences() {
        // Central differences of the energy integral must reproduce the
        // reaction law away from the segment knees. Linear axes step in mm;
        // yaw steps in radians since its energy integral runs over radians.
        let c = stage();
        let knees: [&[f64]; 4] = [&[4.0, 5.0, 10.0], &[5.0, 13.5], &[5.0], &[14.0, 20.0]];
        for (axis, knee_list) in Axis::ALL.into_iter().zip(knees) {
            let law = c.law(axis);
            for k in 0..200 {
                let span = law.travel * 1.04;
                let s = -span + 2.0 * span * (k as f64 + 0.5) / 200.0;
                if knee_list
                    .iter()
                    .any(|&kn| (s.abs() - kn).abs() < 1e-3)
                    || s.abs() < 1e-3
                {
                    continue;
                }
                let fd = match axis {
                    Axis::Yaw => {
                        let h_rad = 1e-7;
                        let rad = s.to_radians();
                        (law.energy((rad + h_rad).to_degrees())
                            - law.energy((rad - h_rad).to_degrees()))
                            / (2.0 * h_rad)
                    }
                    _ => {
                        let h = 1e-5;
                        (law.energy(s + h) - law.energy(s - h)) / (2.0 * h)
                    }
                };
                let expected = law.reaction(s);
                let denom = expected.abs().max(1e-9);
                assert!(
                    ((fd - expected) / denom).abs() < 1e-6,
                    "{axis:?} at {s}: fd {fd} vs {expected}"
                );
            }
        }
    }

    fn square_scene() -> (CrossSection, TargetSite) {
        let cat = Catalog::shipped();
        (
            cat.object("square_prism").unwrap().clone(),
            cat.site("square_base").unwrap().clone(),
        )
    }

    #[test]
    fn no_contact_equilibrium_is_exactly_zero() {
        let c = cal();
        let stage = stage();
        let (obj, site) = square_scene();
        let hand = PlanarPose::new(0.0, 0.0, 30.0, 0.0).unwrap();
        let sol = equilibrate(&c, &stage, &hand, &obj, &site, &ComplianceState::ZERO).unwrap();
        assert_eq!(sol, ComplianceState::ZERO);
    }

    #[test]
    fn all_locked_stays_zero_under_contact() {
        let c = cal();
        let stage = FingerCompliance::from_calibration(&c, [true; 4], Wrench::default());
        let (obj, site) = square_scene();
        // Hand commanded below the table: locked stage cannot comply.
        let hand = PlanarPose::new(30.0, 0.0, site.entry_height() - 0.02, 0.0).unwrap();
        let eq = Equilibrator::from_calibration(&c);
        let sol = eq
            .solve(&stage, &hand, &obj, &site, &ComplianceState::ZERO)
            .unwrap();
        assert_eq!(sol.state, ComplianceState::ZERO);
        assert!(sol.net_contact.fz > 0.0);
    }

    #[test]
    fn table_press_balances_z_law() {
        // Commanding the hand well below the table loads the z slide to its
        // hard-stop band; the spring force must balance the contact force.
        let c = cal();
        let stage = stage();
        let (obj, site) = square_scene();
        let target = 2.0;
        let dz_expect = 5.0 + (target - 0.75) / c.solver.hard_stop_stiffness;
        let hand = PlanarPose::new(40.0, 0.0, site.entry_height() - dz_expect, 0.0).unwrap();
        let eq = Equilibrator::from_calibration(&c);
        let sol = eq
            .solve(&stage, &hand, &obj, &site, &ComplianceState::ZERO)
            .unwrap();
        let fz = sol.net_contact.fz;
        let spring = stage.law(Axis::Z).reaction(sol.state.dz);
        assert!(
            (spring - fz).abs() < 1e-5,
            "force balance: spring {spring} vs contact {fz}"
        );
        assert!(sol.state.dz > 5.0, "z slide must sit in the hard-stop band");
        assert!((fz - target).abs() < 0.1, "press force {fz} near {target} N");
    }

    #[test]
    fn warm_start_independence_near_equilibrium() {
        let c = cal();
        let stage = stage();
        let (obj, site) = square_scene();
        let hand = PlanarPose::new(40.0, 0.0, site.entry_height() - 2.0, 0.0).unwrap();
        let eq = Equilibrator::from_calibration(&c);
        let reference = eq
            .solve(&stage, &hand, &obj, &site, &ComplianceState::ZERO)
            .unwrap();
        let mut rng = 0x9e3779b97f4a7c15u64;
        let mut next = || {
            rng ^= rng << 13;
            rng ^= rng >> 7;
            rng ^= rng << 17;
            (rng >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0
        };
        for _ in 0..10 {
            let warm = ComplianceState {
                dx: next(),
                dy: next(),
                dz: (reference.state.dz + next()).clamp(0.0, 5.4),
                dyaw: next(),
            };
            let sol = eq.solve(&stage, &hand, &obj, &site, &warm).unwrap();
            assert!((sol.state.dx - reference.state.dx).abs() < 1e-4);
            assert!((sol.state.dy - reference.state.dy).abs() < 1e-4);
            assert!((sol.state.dz - reference.state.dz).abs() < 1e-4);
            assert!((sol.state.dyaw - reference.state.dyaw).abs() < 1e-4);
        }
    }

    #[test]
    fn leveraged_rotation_when_yaw_locked_x_free() {
        let c = cal();
        let locked_yaw = FingerCompliance::from_calibration(
            &c,
            [false, false, false, true],
            Wrench::default(),
        );
        assert!(locked_yaw.yaw_active());
        let both = FingerCompliance::from_calibration(
            &c,
            [true, false, false, true],
            Wrench::default(),
        );
        assert!(!both.yaw_active());
        // The leveraged path is stiffer than the bearing detent at small
        // angles: that is what makes yaw-locked insertion harder.
        let free = stage();
        let th: f64 = 2f64.to_radians();
        assert!(locked_yaw.yaw_torque(th) > free.yaw_torque(th));
    }

    #[test]
    fn dropped_when_pushed_past_band() {
        // Commanding the hand 6 mm below the table forces the z slide past
        // its 5.5 mm drop band: the grasp counts as lost.
        let c = cal();
        let stage = stage();
        let (obj, site) = square_scene();
        let hand = PlanarPose::new(40.0, 0.0, site.entry_height() - 6.0, 0.0).unwrap();
        let eq = Equilibrator::from_calibration(&c);
        let err = eq.solve(&stage, &hand, &obj, &site, &ComplianceState::ZERO);
        assert!(matches!(err, Err(SolveError::Dropped { .. })), "{err:?}");
    }
}
