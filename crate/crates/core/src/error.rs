use thiserror::Error;

use crate::geo::GeoPoint;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("point ({}, {}) lies outside the grid bounding box", .0.lat, .0.lon)]
    OutOfBounds(GeoPoint),
    #[error("invalid coordinates: lat {lat}, lon {lon}")]
    InvalidCoordinates { lat: f64, lon: f64 },
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("invalid interval boundaries: {0}")]
    InvalidIntervals(String),
    #[error("file format error: {0}")]
    FileFormat(String),
    #[error("no training months supplied")]
    EmptyTraining,
    #[error("train and test months overlap at {0}")]
    OverlappingSplit(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("degenerate target: {0}")]
    DegenerateTarget(String),
    #[error("empty input")]
    EmptyInput,
    #[error("too few samples: need at least {needed}, got {got}")]
    TooFewSamples { needed: usize, got: usize },
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("unknown feature group `{0}`")]
    UnknownGroup(String),
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("model used before fit")]
    NotFitted,
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}
