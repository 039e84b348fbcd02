use std::io;
use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DomainError {
    #[error("coordinate is not finite")]
    NonFiniteCoordinate,
    #[error("coordinate is negative")]
    NegativeCoordinate,
    #[error("degenerate box ({x1}, {y1}, {x2}, {y2}): need x1 < x2 and y1 < y2")]
    DegenerateBox { x1: f64, y1: f64, x2: f64, y2: f64 },
    #[error("image dimensions must be positive")]
    EmptyImage,
    #[error("instance has no subject entity")]
    MissingSubject,
    #[error("instance has {0} subject entities, expected exactly one")]
    MultipleSubjects(usize),
    #[error("instance has no object entities")]
    NoObjects,
    #[error("entity {index} lies outside the {width}x{height} image")]
    BoxOutOfBounds { index: usize, width: u32, height: u32 },
    #[error("invalid reward config: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PolicyError {
    #[error("symbol {symbol} is outside the vocabulary of size {vocab_size}")]
    UnknownSymbol { symbol: usize, vocab_size: usize },
    #[error("target is empty")]
    EmptyTarget,
    #[error("target length {len} exceeds max length {max}")]
    TargetTooLong { len: usize, max: usize },
    #[error("policy shapes differ: {0}")]
    ShapeMismatch(String),
    #[error("invalid training config: {0}")]
    InvalidConfig(String),
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("text cannot be tokenized at byte {0}")]
    Untokenizable(usize),
}

#[derive(Debug, Error)]
pub enum DataError {
    #[error("cannot read {path}: {source}")]
    Read {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
