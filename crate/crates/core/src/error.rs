use thiserror::Error;

/// Errors raised across the toolkit.
///
/// Each variant corresponds to one failure class of the public operations; the CLI maps
/// them onto exit codes through [`Error::class`].
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("INVALID_GEOMETRY: {0}")]
    InvalidGeometry(String),
    #[error("MESH_FAILURE: {0}")]
    MeshFailure(String),
    #[error("RESOURCE_LIMIT: estimated {estimated} nodes exceeds cap {cap}")]
    ResourceLimit { estimated: usize, cap: usize },
    #[error("UNMATCHED_NODE: no periodic partner for node at ({x}, {y})")]
    UnmatchedNode { x: f64, y: f64 },
    #[error("UNSUPPORTED_DIMENSION: dimension {0} (only 2 is supported)")]
    UnsupportedDimension(usize),
    #[error("NO_MARKED_BOUNDARY: mesh has no {0} edges")]
    NoMarkedBoundary(String),
    #[error("CONFLICTING_CONSTRAINTS: {0}")]
    ConflictingConstraints(String),
    #[error("SINGULAR_SYSTEM: {0}")]
    SingularSystem(String),
    #[error("NO_CONVERGENCE after {iterations} iterations (relative residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("MESH_MISMATCH: {0}")]
    MeshMismatch(String),
    #[error("UNKNOWN_NAME: {0}")]
    UnknownName(String),
    #[error("MESH_REQUIRED: kinetics depend on the cell variable but no cell mesh was given")]
    MeshRequired,
    #[error("TABLE_RANGE: s = {s} outside tabulated range [{lo}, {hi}]")]
    TableRange { s: f64, lo: f64, hi: f64 },
    #[error("POSITIVITY_VIOLATION: min nodal value {value:e} at t = {t}")]
    PositivityViolation { t: f64, value: f64 },
    #[error("POINT_OUTSIDE_DOMAIN: ({x}, {y})")]
    PointOutsideDomain { x: f64, y: f64 },
    #[error("DEGENERATE_DATA: {0}")]
    DegenerateData(String),
    #[error("BUDGET_EXCEEDED: projected {projected} exceeds cap {cap}")]
    BudgetExceeded { projected: usize, cap: usize },
    #[error("INVALID_CONFIG: {0}")]
    InvalidConfig(String),
    #[error("PARSE: {0}")]
    Parse(String),
    #[error("IO: {0}")]
    Io(String),
}

/// Coarse failure class, used for exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Validation,
    Solver,
    Budget,
    Io,
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::InvalidGeometry(_)
            | Error::UnsupportedDimension(_)
            | Error::UnknownName(_)
            | Error::MeshRequired
            | Error::InvalidConfig(_)
            | Error::Parse(_)
            | Error::UnmatchedNode { .. }
            | Error::NoMarkedBoundary(_)
            | Error::ConflictingConstraints(_)
            | Error::DegenerateData(_)
            | Error::MeshMismatch(_)
            | Error::MeshFailure(_) => ErrorClass::Validation,
            Error::ResourceLimit { .. } | Error::BudgetExceeded { .. } => ErrorClass::Budget,
            Error::Io(_) => ErrorClass::Io,
            Error::SingularSystem(_)
            | Error::NoConvergence { .. }
            | Error::TableRange { .. }
            | Error::PositivityViolation { .. }
            | Error::PointOutsideDomain { .. } => ErrorClass::Solver,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
