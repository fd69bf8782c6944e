//! Planar geometry for prismatic objects and their receiving sites.
//!
//! Objects are convex prisms described by a horizontal cross-section. Sites
//! are either chamfered holes or raised bodies that a lid fits over. Because
//! neither objects nor sites tilt, every contact query reduces to two
//! dimensions: a lateral clearance coordinate `u` per boundary point
//! (positive on the blocked side) and a piecewise-linear surface profile in
//! the `(u, z)` plane shared by both site senses.
//!
//! Units are millimetres and degrees throughout. Heights are measured from
//! the plane where the object bottom rests when fully seated.

use crate::error::GeometryError;
use serde::{Deserialize, Serialize};

/// Strict-containment epsilon: boundary-touching counts as not contained.
pub const CONTAINMENT_EPS: f64 = 1e-9;

/// Deterministic perturbation applied when a query point sits exactly on a
/// corner or equidistant feature and the contact normal would be undefined.
const TIE_PERTURB: f64 = 1e-6;

/// Far extent used for the open-ended floor/table rays of a site profile.
const PROFILE_EXTENT: f64 = 1e6;

// ---------------------------------------------------------------------------
// Vectors and poses
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const ZERO: Vec2 = Vec2 { x: 0.0, y: 0.0 };

    pub fn new(x: f64, y: f64) -> Self {
        Vec2 { x, y }
    }

    pub fn dot(self, o: Vec2) -> f64 {
        self.x * o.x + self.y * o.y
    }

    /// z-component of the cross product.
    pub fn cross(self, o: Vec2) -> f64 {
        self.x * o.y - self.y * o.x
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn scaled(self, s: f64) -> Vec2 {
        Vec2::new(self.x * s, self.y * s)
    }

    pub fn rotated(self, angle_rad: f64) -> Vec2 {
        let (s, c) = angle_rad.sin_cos();
        Vec2::new(c * self.x - s * self.y, s * self.x + c * self.y)
    }

    fn normalized(self) -> Option<Vec2> {
        let n = self.norm();
        (n > 1e-12).then(|| self.scaled(1.0 / n))
    }
}

impl std::ops::Add for Vec2 {
    type Output = Vec2;
    fn add(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x + o.x, self.y + o.y)
    }
}

impl std::ops::Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x - o.x, self.y - o.y)
    }
}

/// Object (or hand) pose in the target-site frame.
///
/// `z` is the height of the object's bottom face above the seating plane;
/// `yaw` is in degrees, normalized to (-180, 180].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlanarPose {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub yaw: f64,
}

impl PlanarPose {
    pub fn new(x: f64, y: f64, z: f64, yaw: f64) -> Result<Self, GeometryError> {
        if ![x, y, z, yaw].iter().all(|v| v.is_finite()) {
            return Err(GeometryError::NonFinite("PlanarPose"));
        }
        Ok(PlanarPose {
            x,
            y,
            z,
            yaw: normalize_yaw(yaw),
        })
    }

    pub fn yaw_rad(&self) -> f64 {
        self.yaw.to_radians()
    }

    pub fn translation(&self) -> Vec2 {
        Vec2::new(self.x, self.y)
    }

    /// Maps a point from the object frame into the site frame.
    pub fn apply(&self, p: Vec2) -> Vec2 {
        p.rotated(self.yaw_rad()) + self.translation()
    }

    /// Maps a site-frame point into the object frame.
    pub fn apply_inverse(&self, p: Vec2) -> Vec2 {
        (p - self.translation()).rotated(-self.yaw_rad())
    }
}

/// Normalizes an angle in degrees to (-180, 180].
pub fn normalize_yaw(yaw: f64) -> f64 {
    let mut a = yaw % 360.0;
    if a <= -180.0 {
        a += 360.0;
    } else if a > 180.0 {
        a -= 360.0;
    }
    a
}

// ---------------------------------------------------------------------------
// Footprints and cross-sections
// ---------------------------------------------------------------------------

/// Convex planar outline, centered at the origin of its own frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Footprint {
    /// Counterclockwise convex polygon with centroid at the origin.
    Polygon(Vec<Vec2>),
    Circle { radius: f64 },
}

impl Footprint {
    pub fn rect(width: f64, height: f64) -> Self {
        let (hx, hy) = (width / 2.0, height / 2.0);
        Footprint::Polygon(vec![
            Vec2::new(hx, hy),
            Vec2::new(-hx, hy),
            Vec2::new(-hx, -hy),
            Vec2::new(hx, -hy),
        ])
    }

    /// Regular n-gon with the first vertex at `vertex_angle_deg`.
    pub fn regular_polygon(sides: usize, circumradius: f64, vertex_angle_deg: f64) -> Self {
        let verts = (0..sides)
            .map(|i| {
                let a = (vertex_angle_deg + 360.0 * i as f64 / sides as f64).to_radians();
                Vec2::new(circumradius * a.cos(), circumradius * a.sin())
            })
            .collect();
        Footprint::Polygon(verts)
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        match self {
            Footprint::Circle { radius } => {
                if !radius.is_finite() {
                    return Err(GeometryError::NonFinite("radius"));
                }
                if *radius <= 0.0 {
                    return Err(GeometryError::NonPositiveRadius(*radius));
                }
                Ok(())
            }
            Footprint::Polygon(verts) => {
                if verts.len() < 3 {
                    return Err(GeometryError::TooFewVertices(verts.len()));
                }
                if verts.iter().any(|v| !v.x.is_finite() || !v.y.is_finite()) {
                    return Err(GeometryError::NonFinite("polygon vertex"));
                }
                let n = verts.len();
                let area2: f64 = (0..n)
                    .map(|i| verts[i].cross(verts[(i + 1) % n]))
                    .sum();
                if area2 <= 0.0 {
                    return Err(GeometryError::NotCounterClockwise);
                }
                for i in 0..n {
                    let a = verts[i];
                    let b = verts[(i + 1) % n];
                    let c = verts[(i + 2) % n];
                    if (b - a).cross(c - b) < -1e-9 {
                        return Err(GeometryError::NotConvex((i + 1) % n));
                    }
                }
                let centroid = polygon_centroid(verts);
                if centroid.norm() > 1e-6 {
                    return Err(GeometryError::CentroidOffOrigin(centroid.x, centroid.y));
                }
                Ok(())
            }
        }
    }

    /// Radius of the smallest origin-centered circle containing the footprint.
    pub fn circumradius(&self) -> f64 {
        match self {
            Footprint::Circle { radius } => *radius,
            Footprint::Polygon(v) => v.iter().map(|p| p.norm()).fold(0.0, f64::max),
        }
    }

    /// Offsets the boundary outward by `delta` (inward for negative values).
    /// For polygons each edge line is shifted along its outward normal and
    /// consecutive lines are re-intersected, which is exact for convex shapes
    /// as long as no edge collapses.
    pub fn offset(&self, delta: f64) -> Result<Footprint, GeometryError> {
        match self {
            Footprint::Circle { radius } => {
                let r = radius + delta;
                if r <= 0.0 {
                    return Err(GeometryError::NonPositiveRadius(r));
                }
                Ok(Footprint::Circle { radius: r })
            }
            Footprint::Polygon(verts) => {
                let n = verts.len();
                let mut lines = Vec::with_capacity(n);
                for i in 0..n {
                    let a = verts[i];
                    let b = verts[(i + 1) % n];
                    let normal = edge_outward_normal(a, b);
                    let c = normal.dot(a) + delta;
                    lines.push((normal, c));
                }
                let mut out = Vec::with_capacity(n);
                for i in 0..n {
                    let (n0, c0) = lines[(i + n - 1) % n];
                    let (n1, c1) = lines[i];
                    let det = n0.cross(n1);
                    if det.abs() < 1e-12 {
                        return Err(GeometryError::InvalidSite(
                            "degenerate edge pair in offset".into(),
                        ));
                    }
                    out.push(Vec2::new(
                        (c0 * n1.y - c1 * n0.y) / det,
                        (n0.x * c1 - n1.x * c0) / det,
                    ));
                }
                let fp = Footprint::Polygon(out);
                fp.validate()?;
                Ok(fp)
            }
        }
    }

    /// Signed distance from `p` to the boundary (negative inside) together
    /// with the unit direction of steepest increase. Exact corner incidence
    /// is resolved by a deterministic `TIE_PERTURB` nudge of the query point.
    pub fn signed_distance(&self, p: Vec2) -> (f64, Vec2) {
        match self {
            Footprint::Circle { radius } => {
                let n = p.norm();
                if n < 1e-12 {
                    let q = p + Vec2::new(TIE_PERTURB, 2.0 * TIE_PERTURB);
                    let qn = q.norm();
                    (qn - radius, q.scaled(1.0 / qn))
                } else {
                    (n - radius, p.scaled(1.0 / n))
                }
            }
            Footprint::Polygon(verts) => match polygon_signed_distance(verts, p) {
                Some(r) => r,
                None => {
                    let q = p + Vec2::new(TIE_PERTURB, 2.0 * TIE_PERTURB);
                    polygon_signed_distance(verts, q)
                        .expect("perturbed corner query must resolve")
                }
            },
        }
    }

    /// True iff `p` is strictly inside the boundary offset outward by `grow`.
    pub fn contains_point(&self, p: Vec2, grow: f64) -> bool {
        self.signed_distance(p).0 < grow - CONTAINMENT_EPS
    }
}

fn polygon_centroid(verts: &[Vec2]) -> Vec2 {
    let n = verts.len();
    let mut area2 = 0.0;
    let mut cx = 0.0;
    let mut cy = 0.0;
    for i in 0..n {
        let a = verts[i];
        let b = verts[(i + 1) % n];
        let w = a.cross(b);
        area2 += w;
        cx += (a.x + b.x) * w;
        cy += (a.y + b.y) * w;
    }
    Vec2::new(cx / (3.0 * area2), cy / (3.0 * area2))
}

fn edge_outward_normal(a: Vec2, b: Vec2) -> Vec2 {
    // ccw winding: outward normal is the edge direction rotated -90 deg.
    let d = (b - a).normalized().expect("degenerate polygon edge");
    Vec2::new(d.y, -d.x)
}

/// Signed distance to a convex ccw polygon. Returns `None` when the nearest
/// feature is ambiguous (query exactly on a vertex).
fn polygon_signed_distance(verts: &[Vec2], p: Vec2) -> Option<(f64, Vec2)> {
    let n = verts.len();
    let mut inside = true;
    let mut best_inside = f64::INFINITY;
    let mut best_inside_normal = Vec2::ZERO;
    let mut best_outside = f64::INFINITY;
    let mut best_outside_dir = Vec2::ZERO;

    for i in 0..n {
        let a = verts[i];
        let b = verts[(i + 1) % n];
        let normal = edge_outward_normal(a, b);
        let side = normal.dot(p - a);
        if side > 0.0 {
            inside = false;
        }
        // Distance from the interior to the edge line.
        let line_dist = -side;
        if line_dist < best_inside {
            best_inside = line_dist;
            best_inside_normal = normal;
        }
        // Distance to the edge segment for exterior queries.
        let ab = b - a;
        let t = (p - a).dot(ab) / ab.dot(ab);
        let closest = if t <= 0.0 {
            a
        } else if t >= 1.0 {
            b
        } else {
            a + ab.scaled(t)
        };
        let d = (p - closest).norm();
        if d < best_outside {
            best_outside = d;
            best_outside_dir = p - closest;
        }
    }

    if inside {
        Some((-best_inside, best_inside_normal))
    } else if let Some(dir) = best_outside_dir.normalized() {
        Some((best_outside, dir))
    } else {
        None // exactly on the boundary's nearest feature: caller perturbs
    }
}

/// Object cross-section plus its vertical extent (prism length or lid skirt
/// depth). The footprint is the surface that interacts with the site: the
/// outer outline for pegs, the inner skirt outline for lids.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossSection {
    pub footprint: Footprint,
    pub depth: f64,
}

impl CrossSection {
    pub fn new(footprint: Footprint, depth: f64) -> Result<Self, GeometryError> {
        footprint.validate()?;
        if !(depth.is_finite() && depth > 0.0) {
            return Err(GeometryError::NonFinite("cross-section depth"));
        }
        Ok(CrossSection { footprint, depth })
    }

    /// Perimeter sample points (object frame) used for contact queries.
    /// Polygon corners are always included; edges and circles are subdivided
    /// so that neighbouring samples are at most `spacing` apart.
    pub fn boundary_samples(&self, spacing: f64) -> Vec<Vec2> {
        let mut out = Vec::new();
        match &self.footprint {
            Footprint::Polygon(verts) => {
                let n = verts.len();
                for i in 0..n {
                    let a = verts[i];
                    let b = verts[(i + 1) % n];
                    let len = (b - a).norm();
                    let divisions = (len / spacing).ceil().max(1.0) as usize;
                    for k in 0..divisions {
                        let t = k as f64 / divisions as f64;
                        out.push(a + (b - a).scaled(t));
                    }
                }
            }
            Footprint::Circle { radius } => {
                let count = ((2.0 * std::f64::consts::PI * radius / spacing).ceil() as usize)
                    .clamp(16, 1024);
                for k in 0..count {
                    let a = 2.0 * std::f64::consts::PI * k as f64 / count as f64;
                    out.push(Vec2::new(radius * a.cos(), radius * a.sin()));
                }
            }
        }
        out
    }

    /// Points that can hook over a rim edge: polygon vertices, or eight
    /// equally spaced azimuths for circles.
    pub fn catch_points(&self) -> Vec<Vec2> {
        match &self.footprint {
            Footprint::Polygon(verts) => verts.clone(),
            Footprint::Circle { radius } => (0..8)
                .map(|k| {
                    let a = 2.0 * std::f64::consts::PI * k as f64 / 8.0;
                    Vec2::new(radius * a.cos(), radius * a.sin())
                })
                .collect(),
        }
    }
}

// ---------------------------------------------------------------------------
// Target sites
// ---------------------------------------------------------------------------

/// Whether the moving part drops *into* the boundary (peg in a hole) or fits
/// *over* it (lid over a raised body; clearance is measured outward).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SiteSense {
    Hole,
    Rim,
}

/// A receiving site: a chamfered hole or a raised body for lid fitting.
///
/// `boundary` is the hole opening (Hole) or the body outline the lid skirt
/// must clear (Rim). `cavity_depth` is the height of the entry plane (table
/// surface or body top) above the seating plane. The chamfer is a linear
/// bevel of horizontal width `chamfer_width` and vertical extent
/// `chamfer_depth` (equal widths give the default 45-degree bevel).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetSite {
    pub boundary: Footprint,
    pub chamfer_width: f64,
    pub chamfer_depth: f64,
    pub cavity_depth: f64,
    pub sense: SiteSense,
}

impl TargetSite {
    pub fn new(
        boundary: Footprint,
        chamfer_width: f64,
        chamfer_depth: f64,
        cavity_depth: f64,
        sense: SiteSense,
    ) -> Result<Self, GeometryError> {
        boundary.validate()?;
        if chamfer_width < 0.0 {
            return Err(GeometryError::InvalidSite("chamfer_width < 0".into()));
        }
        if cavity_depth <= 0.0 {
            return Err(GeometryError::InvalidSite("cavity_depth <= 0".into()));
        }
        if chamfer_depth > cavity_depth {
            return Err(GeometryError::InvalidSite(
                "chamfer_depth exceeds cavity_depth".into(),
            ));
        }
        if (chamfer_width > 0.0) != (chamfer_depth > 0.0) {
            return Err(GeometryError::InvalidSite(
                "chamfer width and depth must both be zero or both positive".into(),
            ));
        }
        Ok(TargetSite {
            boundary,
            chamfer_width,
            chamfer_depth,
            cavity_depth,
            sense,
        })
    }

    /// Height of the entry plane (table surface / body top).
    pub fn entry_height(&self) -> f64 {
        self.cavity_depth
    }

    /// Height of the top of the plain wall, where the chamfer bevel begins.
    pub fn wall_top(&self) -> f64 {
        self.cavity_depth - self.chamfer_depth
    }

    /// Object bottom height at or below which a peg counts as inserted
    /// (below the chamfer band) or a lid as seated over the rim.
    pub fn success_height(&self) -> f64 {
        match self.sense {
            SiteSense::Hole => self.cavity_depth - self.chamfer_depth,
            SiteSense::Rim => self.cavity_depth,
        }
    }

    /// Lateral boundary expansion active at height `z`: zero at and below the
    /// wall top, growing linearly across the chamfer band to `chamfer_width`
    /// at the entry plane and above.
    pub fn expansion_at(&self, z: f64) -> f64 {
        if self.chamfer_width == 0.0 {
            return 0.0;
        }
        let frac = ((z - self.wall_top()) / self.chamfer_depth).clamp(0.0, 1.0);
        self.chamfer_width * frac
    }

    /// Lateral clearance coordinate of a site-frame point: positive on the
    /// blocked side (over the table for holes, over the body for rims),
    /// negative on the free-descent side. The returned unit vector points in
    /// the direction of increasing `u`.
    pub fn lateral_coord(&self, p: Vec2) -> (f64, Vec2) {
        let (sd, grad) = self.boundary.signed_distance(p);
        match self.sense {
            SiteSense::Hole => (sd, grad),
            SiteSense::Rim => (-sd, grad.scaled(-1.0)),
        }
    }

    /// Surface profile height over the `u` axis.
    fn profile_height(&self, u: f64) -> f64 {
        if u <= 0.0 {
            0.0
        } else if u < self.chamfer_width {
            self.wall_top() + self.chamfer_depth * (u / self.chamfer_width)
        } else {
            self.entry_height()
        }
    }

    /// Boundary polyline of the site solid in the `(u, z)` plane, ordered
    /// from the seating floor out to the entry plane.
    fn profile_polyline(&self) -> Vec<(Vec2, Vec2)> {
        let wall_top = self.wall_top();
        let entry = self.entry_height();
        let mut segs = vec![
            (Vec2::new(-PROFILE_EXTENT, 0.0), Vec2::new(0.0, 0.0)),
            (Vec2::new(0.0, 0.0), Vec2::new(0.0, wall_top)),
        ];
        if self.chamfer_width > 0.0 {
            segs.push((
                Vec2::new(0.0, wall_top),
                Vec2::new(self.chamfer_width, entry),
            ));
        }
        segs.push((
            Vec2::new(self.chamfer_width, entry),
            Vec2::new(PROFILE_EXTENT, entry),
        ));
        segs
    }

    /// Penetration of a point at `(u, z)` into the site solid, with the 2D
    /// push-out direction. `None` when the point is in free space.
    ///
    /// Only meaningful for penetrations up to ~2 mm; beyond that the step
    /// that produced the state was too large for the quasi-static model.
    pub fn profile_penetration(&self, u: f64, z: f64) -> Option<(f64, Vec2)> {
        if z > self.profile_height(u) {
            return None;
        }
        let q = Vec2::new(u, z);
        let mut best = f64::INFINITY;
        let mut best_point = q;
        for (a, b) in self.profile_polyline() {
            let ab = b - a;
            let t = ((q - a).dot(ab) / ab.dot(ab)).clamp(0.0, 1.0);
            let cp = a + ab.scaled(t);
            let d = (q - cp).norm();
            if d < best {
                best = d;
                best_point = cp;
            }
        }
        let dir = match (best_point - q).normalized() {
            Some(d) => d,
            None => {
                // Exactly on the surface: resolve by nudging into the solid.
                let q2 = Vec2::new(u + TIE_PERTURB, z - 2.0 * TIE_PERTURB);
                return self
                    .profile_penetration(q2.x, q2.y)
                    .map(|(_, dir)| (0.0, dir));
            }
        };
        Some((best, dir))
    }
}

// ---------------------------------------------------------------------------
// Containment
// ---------------------------------------------------------------------------

/// True iff the posed object clears the site boundary active at `pose.z`:
/// strictly inside the (chamfer-expanded) opening for holes, strictly outside
/// the body outline for rims. Boundary contact counts as not contained.
pub fn contains_at(
    object: &CrossSection,
    site: &TargetSite,
    pose: &PlanarPose,
) -> Result<bool, GeometryError> {
    clears_boundary(object, site, pose, 0.0)
}

/// Containment with the boundary relaxed by `slack` mm. The penalty contact
/// model holds a seated object pressed a fraction of a millimetre *into* the
/// boundary, so success detection passes a slack at the penetration scale;
/// `contains_at` itself is the strict zero-slack query.
pub fn clears_boundary(
    object: &CrossSection,
    site: &TargetSite,
    pose: &PlanarPose,
    slack: f64,
) -> Result<bool, GeometryError> {
    object.footprint.validate()?;
    site.boundary.validate()?;
    let grow = site.expansion_at(pose.z);
    Ok(match site.sense {
        SiteSense::Hole => {
            footprint_inside(&object.footprint, pose, &site.boundary, grow + slack)
        }
        SiteSense::Rim => {
            footprint_outside(&object.footprint, pose, &site.boundary, grow - slack)
        }
    })
}

/// Object footprint (posed) strictly inside `region` offset outward by `grow`.
fn footprint_inside(obj: &Footprint, pose: &PlanarPose, region: &Footprint, grow: f64) -> bool {
    match obj {
        Footprint::Polygon(verts) => verts
            .iter()
            .all(|v| region.contains_point(pose.apply(*v), grow)),
        Footprint::Circle { radius } => {
            let (sd, _) = region.signed_distance(pose.translation());
            sd + radius < grow - CONTAINMENT_EPS
        }
    }
}

/// Region (`body`, offset outward by `grow`) strictly inside the posed object
/// footprint: every body boundary point clears the lid skirt.
fn footprint_outside(obj: &Footprint, pose: &PlanarPose, body: &Footprint, grow: f64) -> bool {
    match body {
        Footprint::Polygon(_) => {
            // Offset the body outward by `grow`, then check its vertices
            // against the object interior in the object frame.
            let grown = if grow > 0.0 {
                match body.offset(grow) {
                    Ok(f) => f,
                    Err(_) => return false,
                }
            } else {
                body.clone()
            };
            let Footprint::Polygon(gverts) = &grown else {
                unreachable!()
            };
            gverts.iter().all(|v| {
                let w = pose.apply_inverse(*v);
                obj.contains_point(w, 0.0)
            })
        }
        Footprint::Circle { radius } => {
            let c = pose.apply_inverse(Vec2::ZERO);
            let (sd, _) = obj.signed_distance(c);
            sd + radius + grow < -CONTAINMENT_EPS
        }
    }
}

// ---------------------------------------------------------------------------
// Contact queries
// ---------------------------------------------------------------------------

/// One contact between the object bottom boundary and the site surface.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContactPoint {
    /// Contact location in the site frame (mm).
    pub point: [f64; 3],
    /// Unit normal pointing out of the site solid (the push-out direction).
    pub normal: [f64; 3],
    /// Nonnegative penetration depth (mm).
    pub penetration: f64,
}

/// Contact set between the posed object and the site, sampled along the
/// object's bottom boundary at `spacing` (corners always included).
/// `friction_mu` is recorded for consumers; the geometry itself is
/// frictionless.
pub fn contact_set(
    object: &CrossSection,
    site: &TargetSite,
    pose: &PlanarPose,
    friction_mu: f64,
) -> ContactSet {
    let mut points = Vec::new();
    for sample in object.boundary_samples(DEFAULT_SAMPLE_SPACING) {
        let p = pose.apply(sample);
        let (u, u_dir) = site.lateral_coord(p);
        if let Some((pen, dir2)) = site.profile_penetration(u, pose.z) {
            points.push(ContactPoint {
                point: [p.x, p.y, pose.z],
                normal: [dir2.x * u_dir.x, dir2.x * u_dir.y, dir2.y],
                penetration: pen,
            });
        }
    }
    ContactSet {
        points,
        friction_mu,
    }
}

/// Default boundary sample spacing (mm) for the public contact query.
pub const DEFAULT_SAMPLE_SPACING: f64 = 2.0;

#[derive(Debug, Clone, PartialEq)]
pub struct ContactSet {
    pub points: Vec<ContactPoint>,
    pub friction_mu: f64,
}

impl ContactSet {
    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn max_penetration(&self) -> f64 {
        self.points
            .iter()
            .map(|c| c.penetration)
            .fold(0.0, f64::max)
    }
}

// ---------------------------------------------------------------------------
// Geometric insertability
// ---------------------------------------------------------------------------

/// Largest integer yaw (degrees, 1-degree sweep from 0) at which the centered
/// object still clears the nominal site boundary, i.e. could pass the site as
/// a rigid body. Returns 0 when even yaw 0 does not fit.
pub fn geometric_yaw_limit(object: &CrossSection, site: &TargetSite) -> u32 {
    let mut limit = None;
    for deg in 0..=90 {
        let pose = PlanarPose::new(0.0, 0.0, 0.0, deg as f64).expect("finite pose");
        match contains_at(object, site, &pose) {
            Ok(true) => limit = Some(deg),
            _ => break,
        }
    }
    limit.unwrap_or(0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square_peg() -> CrossSection {
        CrossSection::new(Footprint::rect(19.6, 19.6), 120.0).unwrap()
    }

    fn square_hole() -> TargetSite {
        TargetSite::new(Footprint::rect(20.0, 20.0), 2.0, 2.0, 15.0, SiteSense::Hole).unwrap()
    }

    fn petri_pair() -> (CrossSection, TargetSite) {
        let lid = CrossSection::new(Footprint::Circle { radius: 44.25 }, 11.9).unwrap();
        let dish = TargetSite::new(
            Footprint::Circle { radius: 42.25 },
            0.0,
            0.0,
            11.9,
            SiteSense::Rim,
        )
        .unwrap();
        (lid, dish)
    }

    fn pose(x: f64, y: f64, z: f64, yaw: f64) -> PlanarPose {
        PlanarPose::new(x, y, z, yaw).unwrap()
    }

    #[test]
    fn yaw_normalization() {
        assert_eq!(pose(0.0, 0.0, 0.0, 190.0).yaw, -170.0);
        assert_eq!(pose(0.0, 0.0, 0.0, -180.0).yaw, 180.0);
        assert_eq!(pose(0.0, 0.0, 0.0, 540.0).yaw, 180.0);
        assert_eq!(pose(0.0, 0.0, 0.0, 45.0).yaw, 45.0);
    }

    #[test]
    fn rejects_non_finite_pose() {
        assert!(PlanarPose::new(f64::NAN, 0.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn rejects_non_convex_polygon() {
        let fp = Footprint::Polygon(vec![
            Vec2::new(1.0, 0.75),
            Vec2::new(0.0, 0.25),
            Vec2::new(-1.0, 0.75),
            Vec2::new(-1.0, -1.25),
            Vec2::new(1.0, -1.25),
        ]);
        assert!(matches!(fp.validate(), Err(GeometryError::NotConvex(_))));
    }

    #[test]
    fn rejects_clockwise_polygon() {
        let fp = Footprint::Polygon(vec![
            Vec2::new(0.0, 1.0),
            Vec2::new(1.0, -1.0),
            Vec2::new(-1.0, -1.0),
        ]);
        assert!(matches!(
            fp.validate(),
            Err(GeometryError::NotCounterClockwise)
        ));
    }

    #[test]
    fn square_fits_aligned() {
        // 0.2 mm clearance per side at yaw 0.
        let result = contains_at(&square_peg(), &square_hole(), &pose(0.0, 0.0, 0.0, 0.0));
        assert!(result.unwrap());
    }

    #[test]
    fn square_rejected_at_45_degrees() {
        // Rotated diagonal 27.7 mm exceeds the 20 mm opening.
        let result = contains_at(&square_peg(), &square_hole(), &pose(0.0, 0.0, 0.0, 45.0));
        assert!(!result.unwrap());
    }

    #[test]
    fn square_rejected_at_2_degrees() {
        // 19.6 * (cos 2 + sin 2) = 20.27 > 20.0
        let result = contains_at(&square_peg(), &square_hole(), &pose(0.0, 0.0, 0.0, 2.0));
        assert!(!result.unwrap());
    }

    #[test]
    fn boundary_touch_is_not_contained() {
        let obj = CrossSection::new(Footprint::rect(20.0, 20.0), 10.0).unwrap();
        let result = contains_at(&obj, &square_hole(), &pose(0.0, 0.0, 0.0, 0.0));
        assert!(!result.unwrap());
    }

    #[test]
    fn chamfer_band_expands_aperture() {
        let site = square_hole();
        // 21 mm square: too big for the 20 mm opening, fits within the
        // chamfer-expanded boundary near the entry plane.
        let obj = CrossSection::new(Footprint::rect(21.0, 21.0), 10.0).unwrap();
        assert!(!contains_at(&obj, &site, &pose(0.0, 0.0, 13.0, 0.0)).unwrap());
        assert!(contains_at(&obj, &site, &pose(0.0, 0.0, 14.9, 0.0)).unwrap());
    }

    #[test]
    fn chamfer_monotone_within_band() {
        let site = square_hole();
        let obj = square_peg();
        let p0 = pose(0.35, 0.0, site.wall_top(), 0.0);
        if contains_at(&obj, &site, &p0).unwrap() {
            for k in 0..=10 {
                let z = site.wall_top() + site.chamfer_depth * k as f64 / 10.0;
                let p = pose(0.35, 0.0, z, 0.0);
                assert!(contains_at(&obj, &site, &p).unwrap(), "z = {z}");
            }
        }
    }

    #[test]
    fn geometric_limit_square_is_one_degree() {
        assert_eq!(geometric_yaw_limit(&square_peg(), &square_hole()), 1);
    }

    #[test]
    fn geometric_limit_matches_closed_form_sweep() {
        // Closed form for a square: fits iff side*(cos t + sin t) <= opening.
        for deg in 0..=45u32 {
            let t = (deg as f64).to_radians();
            let fits_closed = 19.6 * (t.cos() + t.sin()) < 20.0 - CONTAINMENT_EPS;
            let fits_sim = contains_at(
                &square_peg(),
                &square_hole(),
                &pose(0.0, 0.0, 0.0, deg as f64),
            )
            .unwrap();
            assert_eq!(fits_sim, fits_closed, "deg = {deg}");
        }
    }

    #[test]
    fn circle_results_yaw_invariant() {
        let (lid, dish) = petri_pair();
        for yaw in [0.0, 13.7, -91.3, 179.9] {
            let c = contains_at(&lid, &dish, &pose(1.2, -0.7, 5.0, yaw)).unwrap();
            assert_eq!(c, contains_at(&lid, &dish, &pose(1.2, -0.7, 5.0, 0.0)).unwrap());
        }
    }

    #[test]
    fn rim_containment_uses_outward_clearance() {
        let (lid, dish) = petri_pair();
        // 2 mm clearance per side: contained until the centre offset reaches it.
        assert!(contains_at(&lid, &dish, &pose(1.9, 0.0, 5.0, 0.0)).unwrap());
        assert!(!contains_at(&lid, &dish, &pose(2.1, 0.0, 5.0, 0.0)).unwrap());
    }

    #[test]
    fn free_descent_has_no_contacts() {
        let site = square_hole();
        // Centered over the hole just below the chamfer top: free descent.
        let contacts = contact_set(&square_peg(), &site, &pose(0.0, 0.0, 14.5, 0.0), 0.3);
        assert!(contacts.is_empty());
    }

    #[test]
    fn offset_square_rests_on_table() {
        let site = square_hole();
        // Offset +4 mm in x with the bottom at table height: part of the
        // boundary overhangs the table.
        let contacts = contact_set(&square_peg(), &site, &pose(4.0, 0.0, 15.0, 0.0), 0.3);
        assert!(!contacts.is_empty());
        assert!(contacts
            .points
            .iter()
            .any(|c| c.normal[2] > 0.99 && c.penetration.abs() < 1e-12));
    }

    #[test]
    fn table_penetration_is_vertical() {
        let site = square_hole();
        let contacts = contact_set(&square_peg(), &site, &pose(30.0, 0.0, 14.6, 0.0), 0.3);
        assert!(!contacts.is_empty());
        for c in &contacts.points {
            assert!((c.penetration - 0.4).abs() < 1e-9);
            assert!((c.normal[2] - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn circle_lid_wall_contact_needs_offset_beyond_clearance() {
        let (lid, dish) = petri_pair();
        // Concentric, below the rim top: no contact.
        let c0 = contact_set(&lid, &dish, &pose(0.0, 0.0, 5.0, 0.0), 0.3);
        assert!(c0.is_empty());
        // Offset just inside the 2 mm clearance: still free.
        let c1 = contact_set(&lid, &dish, &pose(1.95, 0.0, 5.0, 0.0), 0.3);
        assert!(c1.is_empty());
        // Offset beyond the clearance: wall contact with horizontal normal.
        let c2 = contact_set(&lid, &dish, &pose(2.3, 0.0, 5.0, 0.0), 0.3);
        assert!(!c2.is_empty());
        for c in &c2.points {
            assert!(c.normal[2].abs() < 1e-9);
        }
    }

    #[test]
    fn bevel_normal_points_up_and_inward() {
        let site = square_hole();
        // Samples on the +x side sit on the bevel in the chamfer band.
        let contacts = contact_set(&square_peg(), &site, &pose(1.2, 0.0, 13.9, 0.0), 0.3);
        let bevel: Vec<_> = contacts
            .points
            .iter()
            .filter(|c| c.normal[2] > 0.1 && c.normal[2] < 0.9)
            .collect();
        assert!(!bevel.is_empty());
        for c in bevel {
            assert!(c.normal[0] < 0.0, "x-side bevel pushes toward -x: {c:?}");
        }
    }

    #[test]
    fn rotation_invariance_of_containment() {
        // Rotating object pose and site boundary together does not change
        // the containment answer.
        let obj = square_peg();
        for rot in [10.0_f64, 37.0, 120.0] {
            let rotated = match Footprint::rect(20.0, 20.0) {
                Footprint::Polygon(v) => Footprint::Polygon(
                    v.into_iter().map(|p| p.rotated(rot.to_radians())).collect(),
                ),
                _ => unreachable!(),
            };
            let site = TargetSite::new(rotated, 2.0, 2.0, 15.0, SiteSense::Hole).unwrap();
            for yaw in [-3.0, 0.5, 1.0] {
                let plain = contains_at(&obj, &square_hole(), &pose(0.0, 0.0, 0.0, yaw)).unwrap();
                let turned = contains_at(&obj, &site, &pose(0.0, 0.0, 0.0, yaw + rot)).unwrap();
                assert_eq!(plain, turned, "rot = {rot}, yaw = {yaw}");
            }
        }
    }

    #[test]
    fn contact_penetrations_match_brute_force() {
        // Independent oracle: dense boundary sampling plus dense polyline
        // sampling of the site profile on a 0.05 mm grid.
        let site = square_hole();
        let obj = square_peg();
        let poses = [
            pose(4.0, 2.0, 14.7, 6.0),
            pose(0.5, -0.3, 13.2, 1.5),
            pose(11.0, 0.0, 14.96, 0.0),
            pose(0.1, 0.2, 0.05, 0.4),
        ];
        for p in poses {
            let contacts = contact_set(&obj, &site, &p, 0.0);
            for c in &contacts.points {
                let q = Vec2::new(c.point[0], c.point[1]);
                let (u, _) = site.lateral_coord(q);
                let brute = brute_profile_penetration(&site, u, p.z);
                assert!(
                    (c.penetration - brute).abs() <= 0.05,
                    "pose {p:?}: analytic {} vs brute {brute}",
                    c.penetration
                );
            }
        }
    }

    /// Brute-force penetration: walk the profile polyline in 0.05 mm steps
    /// and take the minimum distance to the query point.
    fn brute_profile_penetration(site: &TargetSite, u: f64, z: f64) -> f64 {
        let q = Vec2::new(u, z);
        let mut best = f64::INFINITY;
        for (a, b) in site.profile_polyline() {
            // Clip the unbounded rays to a window around the query.
            let (a, b) = clip_segment(a, b, u);
            let len = (b - a).norm();
            let steps = (len / 0.05).ceil().max(1.0) as usize;
            for k in 0..=steps {
                let t = k as f64 / steps as f64;
                let p = a + (b - a).scaled(t);
                best = best.min((q - p).norm());
            }
        }
        best
    }

    fn clip_segment(a: Vec2, b: Vec2, u: f64) -> (Vec2, Vec2) {
        let clamp = |p: Vec2| Vec2::new(p.x.clamp(u - 50.0, u + 50.0), p.y);
        (clamp(a), clamp(b))
    }

    #[test]
    fn polygon_offset_grows_rect() {
        let grown = Footprint::rect(20.0, 10.0).offset(0.5).unwrap();
        let Footprint::Polygon(v) = grown else {
            panic!()
        };
        assert!((v[0].x - 10.5).abs() < 1e-12);
        assert!((v[0].y - 5.5).abs() < 1e-12);
    }

    #[test]
    fn regular_triangle_centroid_is_origin() {
        let fp = Footprint::regular_polygon(3, 21.1, 90.0);
        fp.validate().unwrap();
        assert!((fp.circumradius() - 21.1).abs() < 1e-9);
    }
}
