use thiserror::Error;

/// Errors raised anywhere in the toric metric pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("polygon needs at least 3 vertices, got {0}")]
    TooFewVertices(usize),
    #[error("polygon is not strictly convex at vertex {vertex}")]
    NotConvex { vertex: usize },
    #[error("polygon vertices are listed clockwise")]
    NotCounterclockwise,
    #[error("polygon is not Delzant at vertex {vertex} {position:?}: edge determinant {det}")]
    NotDelzant {
        vertex: usize,
        position: [i64; 2],
        det: i64,
    },
    #[error("vertex {position:?} lies outside the bounding square [0, {k}]^2")]
    ExceedsBoundingSquare { position: [i64; 2], k: i64 },
    #[error("unknown preset polygon `{0}`")]
    UnknownPreset(String),
    #[error("singular linear system: {0}")]
    SingularSystem(&'static str),
    #[error("point {0:?} is not strictly inside the polygon")]
    OnBoundary([f64; 2]),
    #[error("lattice points are affinely dependent")]
    DegenerateLattice,
    #[error("coefficient set does not match the polygon lattice: {0}")]
    CoefficientMismatch(String),
    #[error("no vertex chart covers t = {t:?} (best max|z| = {best})")]
    NoCoveringChart { t: [f64; 2], best: f64 },
    #[error("non-finite value while evaluating {0}")]
    NonFiniteResult(&'static str),
    #[error("symmetry does not preserve the lattice points of the polygon")]
    GroupDoesNotPreserveLattice,
    #[error("finite-difference step {0} leaves the chart validity region")]
    StepTooLarge(f64),
    #[error("quadrature grid with spacing {0} has no interior nodes")]
    EmptyGrid(f64),
    #[error("quadrature integral I_{index} = {value} is not positive")]
    NonPositiveIntegral { index: usize, value: f64 },
    #[error("correction coefficient gives 1 + eps = {value} <= 0 at lattice index {index}")]
    InvalidCorrection { index: usize, value: f64 },
    #[error("iteration diverged at outer step {outer_step}: L2 error {l2} vs minimum {l2_min}")]
    Diverged {
        outer_step: usize,
        l2: f64,
        l2_min: f64,
    },
    #[error("geodesic step rejected: relative energy jump {jump:e}")]
    StepRejected { jump: f64 },
    #[error("Newton inversion of the moment map failed at x = {0:?}")]
    NewtonFailed([f64; 2]),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
