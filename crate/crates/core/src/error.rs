use thiserror::Error;

use crate::fespace::Space;

/// Errors raised by mesh construction, discrete operators, and the time-stepping schemes.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("degenerate director at {location} {index}: norm {norm:e} below 1e-14")]
    DegenerateDirector {
        location: &'static str,
        index: usize,
        norm: f64,
    },

    #[error("linear solve failed: relative residual {residual:e} exceeds tolerance {tolerance:e}")]
    SolverFailure { residual: f64, tolerance: f64 },

    #[error("entry ({row}, {col}) out of range for a {nrows}x{ncols} system")]
    IndexOutOfRange {
        row: usize,
        col: usize,
        nrows: usize,
        ncols: usize,
    },

    #[error("space mismatch: expected {expected:?}, found {found:?}")]
    SpaceMismatch { expected: Space, found: Space },

    #[error("coefficient length {found} does not match {expected} for space {space:?}")]
    LengthMismatch {
        space: Space,
        expected: usize,
        found: usize,
    },

    #[error("point ({x}, {y}) lies outside the mesh")]
    PointOutsideMesh { x: f64, y: f64 },

    #[error("boundary data has {found} facet values, mesh has {expected} boundary facets")]
    MissingBoundaryData { expected: usize, found: usize },

    #[error("in-plane director vanishes at ({x}, {y})")]
    ZeroInPlaneDirector { x: f64, y: f64 },

    #[error("mesh file line {line}: {message}")]
    MeshFormat { line: usize, message: String },

    #[error("step {step}: {message}")]
    InvariantViolation { step: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
