use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid circle: {0}")]
    InvalidCircle(String),
    #[error("circles {0} and {1} intersect or touch")]
    Overlap(usize, usize),
    #[error("inconsistent orientation: {0}")]
    Orientation(String),
    #[error("circle passes through the origin; its inversion is a line")]
    SingularInversion,
    #[error("point {point} is within {distance:.3e} of circle {circle} (margin {margin:.3e})")]
    TooCloseToContour {
        point: String,
        circle: usize,
        distance: f64,
        margin: f64,
    },
    #[error("grid functions live on different contour systems or dimensions")]
    Alignment,
    #[error("jump matrix is numerically singular at node {node} (|det| = {det:.3e})")]
    SingularJump { node: usize, det: f64 },
    #[error("operator Id - C_w is numerically singular (smallest singular value {sigma_min:.3e})")]
    NearSingularOperator { sigma_min: f64 },
    #[error("contour is not invariant under inversion in the unit circle: {0}")]
    NotInversionInvariantContour(String),
    #[error("singular values cluster near the rank threshold {tau:.1e} (closest {closest:.3e})")]
    RankAmbiguity { tau: f64, closest: f64 },
    #[error("winding number is ambiguous: {0}")]
    WindingAmbiguity(String),
    #[error("factorization constant is not constant across nodes (max deviation {0:.3e})")]
    NonConstantC(f64),
    #[error("factorization constant is not positive definite (min eigenvalue {0:.3e})")]
    NonPositiveC(f64),
    #[error("hypothesis violated: {0}")]
    Hypothesis(String),
    #[error("reflection coefficient too large: sup|r| = {0:.6} (must be < 1)")]
    ReflectionTooLarge(f64),
    #[error("cannot place disjoint pole circles: {0}")]
    CirclePacking(String),
    #[error("radius conflict: {0}")]
    RadiusConflict(String),
    #[error("soliton linear system is singular (smallest pivot {0:.3e})")]
    DegenerateSolitonSystem(f64),
    #[error("parse error at position {position}: {message}")]
    Parse { position: usize, message: String },
    #[error("evaluation error: {0}")]
    Eval(String),
    #[error("invalid input: {0}")]
    Input(String),
}
