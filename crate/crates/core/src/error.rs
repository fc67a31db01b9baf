use thiserror::Error;

/// Errors produced anywhere in the rendering and generation pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("degenerate camera frame: up vector is parallel to the view direction")]
    DegenerateFrame,

    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    #[error("pixel ({row}, {col}) is outside a {rows}x{cols} image")]
    OutOfBounds {
        row: usize,
        col: usize,
        rows: usize,
        cols: usize,
    },

    #[error("depth at pixel ({row}, {col}) must be positive and finite, got {value}")]
    NonPositiveDepth { row: usize, col: usize, value: f64 },

    #[error("resolution mismatch: expected {expected:?}, found {found:?}")]
    ResolutionMismatch {
        expected: (usize, usize),
        found: (usize, usize),
    },

    #[error("a point light coincides with the surfel at pixel ({row}, {col})")]
    LightAtSurfel { row: usize, col: usize },

    #[error("non-finite shading output at pixel ({row}, {col})")]
    NonFiniteOutput { row: usize, col: usize },

    #[error("point set is empty")]
    EmptySet,

    #[error("mask selects no pixels")]
    EmptyMask,

    #[error("could not place objects without overlap after {attempts} attempts")]
    PlacementFailure { attempts: usize },

    #[error("sampling failed: {0}")]
    SamplingFailure(String),

    #[error("camera ray at pixel ({row}, {col}) hit nothing")]
    NoHit { row: usize, col: usize },

    #[error("optimization diverged at iteration {iteration}")]
    Diverged { iteration: usize },

    #[error("malformed file: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Image(#[from] image::ImageError),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
