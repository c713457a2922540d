use std::path::PathBuf;

use thiserror::Error;

use crate::disaster::DisasterType;

/// A name that did not match a closed vocabulary.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UnknownName(pub String);

#[derive(Error, Debug)]
pub enum RasterError {
    #[error("malformed WKT: {0}")]
    MalformedWkt(String),
    #[error("footprint {0:?} rasterizes to an empty mask")]
    EmptyFootprint(String),
    #[error("no footprint produced a non-empty mask")]
    NoValidFootprints,
    #[error("mask is {mask_w}x{mask_h} but scene is {scene_w}x{scene_h}")]
    DimensionMismatch {
        mask_w: usize,
        mask_h: usize,
        scene_w: usize,
        scene_h: usize,
    },
    #[error("chip size must be at least 8, got {0}")]
    InvalidChipSize(usize),
    #[error("invalid scene: {0}")]
    InvalidScene(String),
    #[error("image codec error: {0}")]
    Image(#[from] image::ImageError),
}

impl RasterError {
    pub fn code(&self) -> &'static str {
        match self {
            RasterError::MalformedWkt(_) => "MalformedWkt",
            RasterError::EmptyFootprint(_) => "EmptyFootprint",
            RasterError::NoValidFootprints => "NoValidFootprints",
            RasterError::DimensionMismatch { .. } => "DimensionMismatch",
            RasterError::InvalidChipSize(_) => "InvalidChipSize",
            RasterError::InvalidScene(_) => "InvalidScene",
            RasterError::Image(_) => "InvalidImage",
        }
    }
}

#[derive(Error, Debug, Clone, PartialEq)]
pub enum HazardError {
    #[error("unknown hazard attribute {0:?}")]
    UnknownAttribute(String),
    #[error("attribute {attribute} must be non-negative, got {value}")]
    NegativeValue { attribute: String, value: f64 },
    #[error("no hazard attributes supplied")]
    NoAttributes,
    #[error("threshold row {0} is not strictly decreasing")]
    NonMonotoneRow(String),
    #[error("threshold row {0} must hold exactly 5 finite numbers")]
    IncompleteRow(String),
    #[error("hazard level must be in 1..=5, got {0}")]
    InvalidLevel(i64),
    #[error("malformed threshold document: {0}")]
    MalformedThresholds(String),
}

impl HazardError {
    pub fn code(&self) -> &'static str {
        match self {
            HazardError::UnknownAttribute(_) => "UnknownAttribute",
            HazardError::NegativeValue { .. } => "NegativeValue",
            HazardError::NoAttributes => "NoAttributes",
            HazardError::NonMonotoneRow(_) => "NonMonotoneRow",
            HazardError::IncompleteRow(_) => "IncompleteRow",
            HazardError::InvalidLevel(_) => "InvalidHazardLevel",
            HazardError::MalformedThresholds(_) => "MalformedThresholds",
        }
    }
}

#[derive(Error, Debug)]
pub enum DatasetError {
    #[error("malformed label file: {0}")]
    MalformedLabelFile(String),
    #[error("unknown damage class {0:?}")]
    UnknownDamageClass(String),
    #[error("unknown disaster type {0:?}")]
    UnknownDisasterType(String),
    #[error("unclassified buildings have no damage level")]
    UnclassifiedNotMappable,
    #[error("catalog contains no labeled buildings")]
    EmptyCatalog,
    #[error("event {event} mixes disaster types {first} and {second}")]
    MixedDisasterTypesInEvent {
        event: String,
        first: DisasterType,
        second: DisasterType,
    },
    #[error("stratum {stratum} has {count} usable buildings, need at least 2")]
    InsufficientData { stratum: String, count: usize },
    #[error("split ratio must be in (0, 1), got {0}")]
    InvalidRatio(f64),
    #[error("footprint in {scene}: {source}")]
    Geometry {
        scene: String,
        #[source]
        source: RasterError,
    },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl DatasetError {
    pub fn code(&self) -> &'static str {
        match self {
            DatasetError::MalformedLabelFile(_) => "MalformedLabelFile",
            DatasetError::UnknownDamageClass(_) => "UnknownDamageClass",
            DatasetError::UnknownDisasterType(_) => "UnknownDisasterType",
            DatasetError::UnclassifiedNotMappable => "UnclassifiedNotMappable",
            DatasetError::EmptyCatalog => "EmptyCatalog",
            DatasetError::MixedDisasterTypesInEvent { .. } => "MixedDisasterTypesInEvent",
            DatasetError::InsufficientData { .. } => "InsufficientData",
            DatasetError::InvalidRatio(_) => "InvalidRatio",
            DatasetError::Geometry { source, .. } => source.code(),
            DatasetError::Io { .. } => "IoError",
        }
    }
}

#[derive(Error, Debug, Clone, PartialEq)]
pub enum EnsembleError {
    #[error("unknown disaster type {0:?}")]
    UnknownDisasterType(String),
    #[error("no backbone available for {0}")]
    NoBackboneAvailable(DisasterType),
    #[error("cut points must be strictly increasing")]
    NonMonotoneCutPoints,
    #[error("training data needs at least 2 distinct labels")]
    DegenerateDataset,
    #[error("backbone {backbone} failed: {message}")]
    BackboneFailure { backbone: String, message: String },
    #[error("routing weights sum to {0}, expected 1")]
    InvalidRoutingWeights(f64),
    #[error("invalid co-occurrence matrix: {0}")]
    InvalidCoOccurrence(String),
    #[error("invalid model input: {0}")]
    InvalidInput(String),
}

impl EnsembleError {
    pub fn code(&self) -> &'static str {
        match self {
            EnsembleError::UnknownDisasterType(_) => "UnknownDisasterType",
            EnsembleError::NoBackboneAvailable(_) => "NoBackboneAvailable",
            EnsembleError::NonMonotoneCutPoints => "NonMonotoneCutPoints",
            EnsembleError::DegenerateDataset => "DegenerateDataset",
            EnsembleError::BackboneFailure { .. } => "BackboneFailure",
            EnsembleError::InvalidRoutingWeights(_) => "InvalidRoutingWeights",
            EnsembleError::InvalidCoOccurrence(_) => "InvalidCoOccurrence",
            EnsembleError::InvalidInput(_) => "InvalidInput",
        }
    }
}

#[derive(Error, Debug, Clone, PartialEq)]
pub enum MapError {
    #[error("scene has no geo bounds")]
    MissingGeoBounds,
    #[error("prediction and gold building ids differ: {0}")]
    IdMismatch(String),
    #[error("sweep levels must be a non-empty list of levels in 1..=5")]
    InvalidLevels,
    #[error("malformed GeoJSON: {0}")]
    MalformedGeoJson(String),
    #[error("damage map has {entries} entries for {footprints} footprints")]
    FootprintMismatch { entries: usize, footprints: usize },
}

impl MapError {
    pub fn code(&self) -> &'static str {
        match self {
            MapError::MissingGeoBounds => "MissingGeoBounds",
            MapError::IdMismatch(_) => "IdMismatch",
            MapError::InvalidLevels => "InvalidLevels",
            MapError::MalformedGeoJson(_) => "MalformedGeoJson",
            MapError::FootprintMismatch { .. } => "FootprintMismatch",
        }
    }
}

/// Crate-wide error; every variant carries a stable machine-readable code.
#[derive(Error, Debug)]
pub enum Error {
    #[error(transparent)]
    Raster(#[from] RasterError),
    #[error(transparent)]
    Hazard(#[from] HazardError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Ensemble(#[from] EnsembleError),
    #[error(transparent)]
    Map(#[from] MapError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn code(&self) -> &'static str {
        match self {
            Error::Raster(e) => e.code(),
            Error::Hazard(e) => e.code(),
            Error::Dataset(e) => e.code(),
            Error::Ensemble(e) => e.code(),
            Error::Map(e) => e.code(),
            Error::Io { .. } => "IoError",
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
