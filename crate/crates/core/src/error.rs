use alloc::string::String;
use alloc::vec::Vec;

use crate::geometry::PoseComponent;

/// Errors produced by the core pipeline.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("binary STL truncated: expected {expected} bytes for {declared} facets, found {actual}")]
    TruncatedStl {
        declared: u32,
        expected: usize,
        actual: usize,
    },
    #[error("malformed ASCII STL at line {line}: {reason}")]
    MalformedStl { line: usize, reason: String },
    #[error("mesh has no non-degenerate triangles")]
    EmptyMesh,
    #[error("non-finite vertex coordinate in facet {facet}")]
    NonFiniteVertex { facet: usize },

    #[error("pose component {component} = {value} outside [{min}, {max}]")]
    PoseOutOfRange {
        component: PoseComponent,
        value: f64,
        min: f64,
        max: f64,
    },

    #[error("invalid camera: {0}")]
    InvalidCamera(&'static str),
    #[error("invalid calibration: {0}")]
    InvalidCalibration(&'static str),
    #[error("object mask is empty")]
    EmptyMask,
    #[error("degenerate scale factor {0} (must be > 0)")]
    DegenerateScale(f64),

    #[error("pose log is missing column `{0}`")]
    MissingColumn(String),
    #[error("pose log row {row}: cannot parse `{column}` value `{text}`")]
    UnparsableNumber {
        row: usize,
        column: String,
        text: String,
    },
    #[error("pose log row {row}: duplicate frame id {frame}")]
    DuplicateFrame { row: usize, frame: u32 },
    #[error("pose log row {row}: {component} = {value} outside [{min}, {max}]")]
    PoseRowOutOfRange {
        row: usize,
        component: PoseComponent,
        value: f64,
        min: f64,
        max: f64,
    },

    #[error("prompt JSON is malformed: {0}")]
    MalformedPrompt(String),
    #[error("prompt schema mismatch: {0}")]
    SchemaMismatch(String),
    #[error("prompt is missing key `{0}`")]
    MissingKey(String),
    #[error("sensor_context names no known modality")]
    ModalityNotFound,

    #[error("split ratios must be non-negative and sum to 1, got {0:?}")]
    InvalidRatios([f64; 3]),
    #[error("manifest is not aligned across modalities: {} offending keys", .0.len())]
    UnalignedManifest(Vec<(String, u32)>),

    #[error("shape mismatch: expected {expected:?}, got {actual:?}")]
    ShapeMismatch {
        expected: Vec<usize>,
        actual: Vec<usize>,
    },
    #[error("invalid noise schedule: {0}")]
    InvalidSchedule(&'static str),
    #[error("invalid sampler configuration: {0}")]
    InvalidSampler(&'static str),
    #[error("non-finite loss {loss} at step {step}")]
    NonFiniteLoss { step: usize, loss: f64 },
    #[error("non-finite latent at sampling step {0}")]
    NonFiniteLatent(usize),
    #[error("empty batch")]
    EmptyBatch,
    #[error("parameter table mismatch: {0}")]
    ParamMismatch(String),

    #[error("image dimensions differ: {0:?} vs {1:?}")]
    DimensionMismatch([usize; 3], [usize; 3]),
    #[error("image {width}x{height} smaller than the {window}x{window} window")]
    ImageTooSmall {
        width: usize,
        height: usize,
        window: usize,
    },
    #[error("feature dimension mismatch: {0} vs {1}")]
    FeatureDimMismatch(usize, usize),
    #[error("covariance is indefinite (eigenvalue {0})")]
    IndefiniteCovariance(f64),
    #[error("feature set needs at least 2 samples, got {0}")]
    TooFewSamples(usize),
}

pub type Result<T> = core::result::Result<T, Error>;
