use thiserror::Error;

/// Errors raised by the toolkit.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("degenerate cube: half-side must be positive, got {0}")]
    DegenerateCube(f64),
    #[error("cube family is empty")]
    EmptyFamily,
    #[error("dilation factor must be >= 1, got {0}")]
    BadDilation(f64),
    #[error("doubling parameters rejected: need alpha > 1 and beta > alpha^n (alpha = {alpha}, beta = {beta}, n = {n})")]
    BadBeta { alpha: f64, beta: f64, n: f64 },
    #[error("top ladder level (side {side}) does not cover the support from anchor {anchor}")]
    TopLevelTooSmall { side: f64, anchor: usize },
    #[error("inner cube is not contained in the outer cube")]
    NotNested,
    #[error("linear program solver failed: {0}")]
    SolverFailure(String),
    #[error("cube carries zero mass")]
    ZeroMassCube,
    #[error("pair ({0}, {1}) refers to coincident points")]
    SamePoint(usize, usize),
    #[error("no admissible triples satisfy 2 dist(x1, x2) <= dist(x1, y)")]
    NoAdmissibleTriples,
    #[error("annulus radii must satisfy 0 < r < R, got r = {0}, R = {1}")]
    BadAnnulus(f64, f64),
    #[error("no eligible doubling cubes after the K threshold filter")]
    NoEligibleCubes,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid measure: {0}")]
    InvalidMeasure(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
