//! Object and site catalog loaded from a versioned data file.
//!
//! The shipped `data/catalog.toml` carries the desk-scale task dimensions
//! (all in mm); logic never hard-codes them. Rim-sense sites are stored as
//! the mating lid outline plus a per-side clearance and the body outline is
//! derived at load time.

use crate::error::{CatalogError, GeometryError};
use crate::geometry::{contains_at, CrossSection, Footprint, PlanarPose, SiteSense, TargetSite};
use serde::Deserialize;
use std::collections::BTreeMap;

/// Canonical catalog shipped with the crate.
pub const DEFAULT_CATALOG_TOML: &str = include_str!("../data/catalog.toml");

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum ShapeSpec {
    Rect { width: f64, height: f64 },
    RegularPolygon {
        sides: usize,
        circumradius: f64,
        vertex_angle_deg: f64,
    },
    Circle { diameter: f64 },
}

impl ShapeSpec {
    fn build(&self) -> Footprint {
        match *self {
            ShapeSpec::Rect { width, height } => Footprint::rect(width, height),
            ShapeSpec::RegularPolygon {
                sides,
                circumradius,
                vertex_angle_deg,
            } => Footprint::regular_polygon(sides, circumradius, vertex_angle_deg),
            ShapeSpec::Circle { diameter } => Footprint::Circle {
                radius: diameter / 2.0,
            },
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
struct ObjectSpec {
    shape: ShapeSpec,
    depth: f64,
}

#[derive(Debug, Clone, Deserialize)]
struct SiteSpec {
    sense: String,
    /// Hole opening outline (hole sense only).
    shape: Option<ShapeSpec>,
    /// Mating lid inner outline (rim sense only); the body outline is this
    /// shrunk by `clearance_per_side`.
    lid_inner: Option<ShapeSpec>,
    #[serde(default)]
    clearance_per_side: f64,
    #[serde(default)]
    chamfer_width: f64,
    /// Vertical bevel extent; defaults to the width (45-degree bevel).
    chamfer_depth: Option<f64>,
    /// Entry-plane height: hole cavity depth or rim engagement depth.
    cavity_depth: f64,
}

#[derive(Debug, Clone, Deserialize)]
struct PairSpec {
    object: String,
    site: String,
}

#[derive(Debug, Clone, Deserialize)]
struct CatalogFile {
    version: u32,
    objects: BTreeMap<String, ObjectSpec>,
    sites: BTreeMap<String, SiteSpec>,
    #[serde(default)]
    pairs: BTreeMap<String, PairSpec>,
}

/// Named objects, sites, and object-site pairings.
#[derive(Debug, Clone)]
pub struct Catalog {
    pub version: u32,
    objects: BTreeMap<String, CrossSection>,
    sites: BTreeMap<String, TargetSite>,
    pairs: BTreeMap<String, (String, String)>,
}

impl Catalog {
    /// Parses and validates a catalog document.
    pub fn from_toml(text: &str) -> Result<Self, CatalogError> {
        let file: CatalogFile = toml::from_str(text)?;
        let mut objects = BTreeMap::new();
        for (name, spec) in &file.objects {
            let cs = CrossSection::new(spec.shape.build(), spec.depth)
                .map_err(|e| CatalogError::Entry(name.clone(), e))?;
            objects.insert(name.clone(), cs);
        }
        let mut sites = BTreeMap::new();
        for (name, spec) in &file.sites {
            let site = build_site(spec).map_err(|e| CatalogError::Entry(name.clone(), e))?;
            sites.insert(name.clone(), site);
        }
        let mut pairs = BTreeMap::new();
        for (name, spec) in &file.pairs {
            let object = objects
                .get(&spec.object)
                .ok_or_else(|| CatalogError::DanglingPair {
                    name: name.clone(),
                    kind: "object",
                    key: spec.object.clone(),
                })?;
            let site = sites
                .get(&spec.site)
                .ok_or_else(|| CatalogError::DanglingPair {
                    name: name.clone(),
                    kind: "site",
                    key: spec.site.clone(),
                })?;
            // Structural sanity: the nominal footprint must fit its site at
            // yaw 0 once fully seated.
            let pose = PlanarPose::new(0.0, 0.0, 0.0, 0.0).expect("finite");
            let fits = contains_at(object, site, &pose)
                .map_err(|e| CatalogError::Entry(name.clone(), e))?;
            if !fits {
                return Err(CatalogError::PairDoesNotFit(name.clone()));
            }
            pairs.insert(name.clone(), (spec.object.clone(), spec.site.clone()));
        }
        Ok(Catalog {
            version: file.version,
            objects,
            sites,
            pairs,
        })
    }

    /// Loads the catalog shipped with the crate.
    pub fn shipped() -> Self {
        Self::from_toml(DEFAULT_CATALOG_TOML).expect("shipped catalog must be valid")
    }

    pub fn object(&self, name: &str) -> Result<&CrossSection, CatalogError> {
        self.objects
            .get(name)
            .ok_or_else(|| CatalogError::UnknownObject(name.to_string()))
    }

    pub fn site(&self, name: &str) -> Result<&TargetSite, CatalogError> {
        self.sites
            .get(name)
            .ok_or_else(|| CatalogError::UnknownSite(name.to_string()))
    }

    /// Resolves a named object-site pair.
    pub fn pair(&self, name: &str) -> Result<(&CrossSection, &TargetSite), CatalogError> {
        let (obj, site) = self
            .pairs
            .get(name)
            .ok_or_else(|| CatalogError::UnknownObject(name.to_string()))?;
        Ok((self.object(obj)?, self.site(site)?))
    }

    pub fn object_names(&self) -> impl Iterator<Item = &str> {
        self.objects.keys().map(String::as_str)
    }

    pub fn site_names(&self) -> impl Iterator<Item = &str> {
        self.sites.keys().map(String::as_str)
    }

    pub fn pair_names(&self) -> impl Iterator<Item = &str> {
        self.pairs.keys().map(String::as_str)
    }
}

fn build_site(spec: &SiteSpec) -> Result<TargetSite, GeometryError> {
    let sense = match spec.sense.as_str() {
        "hole" => SiteSense::Hole,
        "rim" => SiteSense::Rim,
        other => {
            return Err(GeometryError::InvalidSite(format!(
                "unknown sense '{other}'"
            )))
        }
    };
    let boundary = match sense {
        SiteSense::Hole => spec
            .shape
            .as_ref()
            .ok_or_else(|| GeometryError::InvalidSite("hole site needs `shape`".into()))?
            .build(),
        SiteSense::Rim => {
            let lid = spec
                .lid_inner
                .as_ref()
                .ok_or_else(|| GeometryError::InvalidSite("rim site needs `lid_inner`".into()))?
                .build();
            if spec.clearance_per_side <= 0.0 {
                return Err(GeometryError::InvalidSite(
                    "rim site needs positive clearance_per_side".into(),
                ));
            }
            lid.offset(-spec.clearance_per_side)?
        }
    };
    let chamfer_depth = spec.chamfer_depth.unwrap_or(spec.chamfer_width);
    TargetSite::new(
        boundary,
        spec.chamfer_width,
        chamfer_depth,
        spec.cavity_depth,
        sense,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Footprint;

    #[test]
    fn shipped_catalog_loads_and_validates() {
        let cat = Catalog::shipped();
        assert_eq!(cat.version, 1);
        for name in [
            "square_prism",
            "triangular_prism",
            "wellplate_lid",
            "petri_lid",
        ] {
            cat.object(name).unwrap();
        }
        for name in [
            "square_base",
            "triangular_base",
            "wellplate",
            "petri_dish",
            "holder_groove",
        ] {
            cat.site(name).unwrap();
        }
    }

    #[test]
    fn shipped_dimensions_are_canonical() {
        let cat = Catalog::shipped();
        let sq = cat.object("square_prism").unwrap();
        assert!((sq.footprint.circumradius() - 19.6 / 2.0 * 2f64.sqrt()).abs() < 1e-9);
        assert_eq!(sq.depth, 120.0);

        let tri = cat.object("triangular_prism").unwrap();
        assert!((tri.footprint.circumradius() - 21.1).abs() < 1e-9);

        let hole = cat.site("square_base").unwrap();
        assert_eq!(hole.chamfer_width, 2.0);
        assert_eq!(hole.cavity_depth, 15.0);

        let tri_hole = cat.site("triangular_base").unwrap();
        assert_eq!(tri_hole.chamfer_width, 2.5);
        assert!((tri_hole.boundary.circumradius() - 21.7).abs() < 1e-9);

        let lid = cat.object("wellplate_lid").unwrap();
        assert_eq!(lid.depth, 8.2);

        // Rim body outline = lid inner shrunk by the per-side clearance.
        let wp = cat.site("wellplate").unwrap();
        let Footprint::Polygon(v) = &wp.boundary else {
            panic!()
        };
        assert!((v[0].x - (124.6 / 2.0 - 2.0)).abs() < 1e-9);
        assert!((v[0].y - (82.6 / 2.0 - 2.0)).abs() < 1e-9);

        let dish = cat.site("petri_dish").unwrap();
        let Footprint::Circle { radius } = dish.boundary else {
            panic!()
        };
        assert!((radius - (88.5 / 2.0 - 2.0)).abs() < 1e-9);
    }

    #[test]
    fn unknown_names_error() {
        let cat = Catalog::shipped();
        assert!(cat.object("bolt").is_err());
        assert!(cat.site("socket").is_err());
    }

    #[test]
    fn pairs_resolve() {
        let cat = Catalog::shipped();
        for name in ["square", "triangle", "wellplate_lid", "petri_lid"] {
            cat.pair(name).unwrap();
        }
    }
}
