use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("malformed row {row}: {reason}")]
    MalformedRow { row: usize, reason: String },
    #[error("duplicate point at ({x}, {y}) (rows {first} and {second})")]
    DuplicatePoint {
        x: f64,
        y: f64,
        first: usize,
        second: usize,
    },
    #[error("mark out of range: {mark} not in 1..={p}")]
    MarkOutOfRange { mark: i64, p: usize },
    #[error("point ({x}, {y}) lies outside the window")]
    OutsideWindow { x: f64, y: f64 },
    #[error("invalid window: {0}")]
    InvalidWindow(String),
    #[error("eroded region is empty (erosion distance {distance})")]
    EmptyErosion { distance: f64 },
    #[error("invalid raster: {0}")]
    InvalidRaster(String),
    #[error("location ({x}, {y}) is outside the raster extent")]
    OutsideRaster { x: f64, y: f64 },
    #[error("grid has {cells} cells, above the Cholesky limit of {limit}")]
    GridTooLarge { cells: usize, limit: usize },
    #[error("covariance factorization failed (matrix not positive definite)")]
    Factorization,
    #[error("invalid interaction specification: {0}")]
    InvalidInteraction(String),
    #[error("invalid model specification: {0}")]
    InvalidModel(String),
    #[error("reparametrization is rank deficient: {0}")]
    RankDeficientReparam(String),
    #[error("parameter vector has length {got}, expected {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("model has no baseline field")]
    MissingBaseline,
    #[error("no observed points in the eroded domain")]
    EmptyDomain,
    #[error(
        "observed point {point} violates the hard core with point {neighbor} (distance {distance})"
    )]
    HardCoreViolation {
        point: usize,
        neighbor: usize,
        distance: f64,
    },
    #[error("all candidate marks are infeasible at ({x}, {y})")]
    AllMarksInfeasible { x: f64, y: f64 },
    #[error("sensitivity matrix is singular; null space involves {params:?}")]
    RankDeficient { params: Vec<String> },
    #[error("parameters diverge (separation); increasing direction {direction:?}")]
    Separation { direction: Vec<(String, f64)> },
    #[error("Newton iterations did not converge after {iterations} iterations (score sup-norm {score_norm})")]
    NotConverged { iterations: usize, score_norm: f64 },
    #[error("singular matrix in sandwich estimate")]
    SingularSensitivity,
    #[error("intensity {value} exceeds dominating bound {bound} at ({x}, {y})")]
    DominationExceeded { value: f64, bound: f64, x: f64, y: f64 },
    #[error("model is not locally stable: {0}")]
    Unstable(String),
    #[error("initial state is infeasible")]
    InfeasibleInitialState,
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("no grid combination could be fitted")]
    ProfileFailed,
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
