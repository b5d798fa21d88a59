use thiserror::Error;

/// Errors raised by the optional Pólya tree library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("split index {index} out of range (region has {available} splits)")]
    SplitOutOfRange { index: usize, available: usize },

    #[error("point {point:?} lies outside the region")]
    PointOutsideRegion { point: Vec<f64> },

    #[error("region kind does not match partition scheme")]
    RegionKindMismatch,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid data: {0}")]
    InvalidData(String),

    #[error("numerical fault: {0}")]
    NumericalFault(String),

    #[error("region {0} is absent from the table")]
    RegionNotInTable(String),

    #[error("region at level {level} exceeds the maximum level {max_level}")]
    MaxLevelExceeded { level: u32, max_level: u32 },

    #[error("input outside tractable bounds: {0}")]
    Bounds(String),
}

pub type Result<T> = std::result::Result<T, Error>;
