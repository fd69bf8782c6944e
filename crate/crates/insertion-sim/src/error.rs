use thiserror::Error;

#[derive(Debug, Error)]
pub enum GeometryError {
    #[error("polygon must have at least 3 vertices, got {0}")]
    TooFewVertices(usize),
    #[error("polygon is not convex at vertex {0}")]
    NotConvex(usize),
    #[error("polygon winding must be counterclockwise")]
    NotCounterClockwise,
    #[error("polygon centroid ({0:.6}, {1:.6}) is not at the origin")]
    CentroidOffOrigin(f64, f64),
    #[error("radius must be positive, got {0}")]
    NonPositiveRadius(f64),
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("invalid site: {0}")]
    InvalidSite(String),
}

#[derive(Debug, Error)]
pub enum CatalogError {
    #[error("failed to parse catalog: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("catalog entry '{0}': {1}")]
    Entry(String, GeometryError),
    #[error("unknown object '{0}'")]
    UnknownObject(String),
    #[error("unknown site '{0}'")]
    UnknownSite(String),
    #[error("pair '{name}' references missing {kind} '{key}'")]
    DanglingPair {
        name: String,
        kind: &'static str,
        key: String,
    },
    #[error("catalog entry '{0}': object footprint does not fit its site at yaw 0")]
    PairDoesNotFit(String),
}

#[derive(Debug, Error)]
pub enum CalibrationError {
    #[error("failed to parse calibration: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("calibration value out of range: {0}")]
    OutOfRange(String),
}

/// Equilibrium solve failures. `NonConvergence` is always surfaced to the
/// caller; a trial that hits it is reported as a numerical failure, never
/// silently accepted.
#[derive(Debug, Error, Clone, Copy, PartialEq)]
pub enum SolveError {
    #[error("equilibrium solve did not converge after {iterations} iterations (residual {residual:.3e})")]
    NonConvergence { iterations: usize, residual: f64 },
    #[error("equilibrium left the travel band on axis {axis} (displacement {displacement:.3})")]
    Dropped { axis: &'static str, displacement: f64 },
}

#[derive(Debug, Error)]
pub enum TrialError {
    #[error("trial spec invalid: {0}")]
    InvalidSpec(String),
    #[error(transparent)]
    Catalog(#[from] CatalogError),
}

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Trial(#[from] TrialError),
    #[error("experiment config invalid: {0}")]
    InvalidConfig(String),
    #[error("failed to write {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("failed to parse experiment config: {0}")]
    Parse(#[from] toml::de::Error),
}
