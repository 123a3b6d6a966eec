use thiserror::Error;

/// Errors produced by the shape-sensing pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not skew-symmetric (asymmetry {asymmetry:e})")]
    NotSkew { asymmetry: f64 },

    #[error("matrix is not a rotation: {0}")]
    NotRotation(String),

    #[error("arclength {s} outside [0, {length}]")]
    ArclengthOutOfRange { s: f64, length: f64 },

    #[error("invalid basis: {0}")]
    InvalidBasis(String),

    #[error("coefficient vector has length {got}, basis expects {expected}")]
    CoefficientLength { expected: usize, got: usize },

    #[error("invalid integration grid: {0}")]
    InvalidGrid(String),

    #[error("point too close to the camera center (|x| = {0:e})")]
    DegeneratePoint(f64),

    #[error("pixel maps outside the calibrated region")]
    UncalibratedPixel,

    #[error("direction is outside the camera field of view ({angle_deg:.3} deg off-axis)")]
    OutsideFov { angle_deg: f64 },

    #[error("silhouette undefined: tangent aligned with viewing ray (|t x p| = {0:e})")]
    DegenerateSilhouette(f64),

    #[error("invalid camera model: {0}")]
    InvalidCamera(String),

    #[error("invalid observations: {0}")]
    InvalidObservations(String),

    #[error("non-finite residuals at the initial point")]
    NonFiniteResiduals,

    #[error("rank-deficient problem: {0}")]
    RankDeficient(String),

    #[error("schema error: {0}")]
    Schema(String),

    #[error("malformed JSON: {0}")]
    Json(#[from] serde_json::Error),

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
