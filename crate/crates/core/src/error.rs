//! Error type shared by every stage of the pipeline.
//!
//! Variants are grouped by the class of failure they signal so that callers
//! (the CLI in particular) can map them onto coarse exit categories without
//! matching on every variant.

use std::path::PathBuf;

/// Coarse failure class, used by front ends to pick an exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    /// Unreadable or malformed input data.
    Input,
    /// Input was readable but violates a stage precondition.
    Precondition,
    /// A numerical degeneracy that the data itself triggered.
    Numerical,
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    // ---- vector math ----
    #[error("cannot normalize a zero vector")]
    ZeroVector,
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("correlation undefined: an input has zero variance")]
    ZeroVariance,
    #[error("{} target bands lie outside the source wavelength support (first: index {first})", indices.len(), first = indices[0])]
    OutOfRangeBand { indices: Vec<usize> },

    // ---- ingest ----
    #[error("malformed ENVI header {path}: {reason}")]
    MalformedHeader { path: PathBuf, reason: String },
    #[error("{path}: expected {expected} bytes of image data, found {found}")]
    SizeMismatch {
        path: PathBuf,
        expected: u64,
        found: u64,
    },
    #[error("unsupported ENVI data type {code} (supported: 1, 2, 4)")]
    UnsupportedDataType { code: i64 },
    #[error("{path}: {source}")]
    IoFailure {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("no solar irradiance value for band {band}")]
    MissingEsun { band: usize },
    #[error("solar zenith angle {zenith_deg} deg puts the sun at or below the horizon")]
    SunBelowHorizon { zenith_deg: f64 },
    #[error("cube is already in reflectance units")]
    AlreadyReflectance,
    #[error("cube is in radiance units; run the conversion step first")]
    StillRadiance,
    #[error("library file {path} contains no usable samples")]
    EmptyLibrary { path: PathBuf },
    #[error("library file {path}: wavelengths are not strictly increasing at row {row}")]
    NonMonotonicWavelengths { path: PathBuf, row: usize },
    #[error("band mask range {lo}-{hi} exceeds the {bands}-band cube")]
    RangeOutOfBounds { lo: usize, hi: usize, bands: usize },

    // ---- configuration ----
    #[error("config {path}, line {line}: {reason}")]
    MalformedConfig {
        path: PathBuf,
        line: usize,
        reason: String,
    },
    #[error("invalid scene or pipeline setting: {reason}")]
    InvalidSpec { reason: String },

    // ---- pre-classification ----
    #[error("k-means needs at least {needed} pixels, got {got}")]
    TooFewPixels { needed: usize, got: usize },
    #[error("elbow selection needs a curve with at least 3 points, got {points}")]
    DegenerateCurve { points: usize },
    #[error("pixel cloud has affine dimension {affine_dim}, too flat for {requested} endmembers")]
    RankDeficient {
        affine_dim: usize,
        requested: usize,
    },
    #[error("class {class} contains no pixels")]
    EmptyClass { class: String },

    // ---- subclassing ----
    #[error("signature grid has {signature} bands but pixels have {pixels}")]
    GridMismatch { signature: usize, pixels: usize },
    #[error("{which} subclass is empty; thresholds isolate no representative pixels")]
    EmptySubclass { which: &'static str },
    #[error("no class correlates with the library signature; cannot pick a soil class")]
    SoilClassUndetermined,

    // ---- orchestration ----
    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    // ---- projection and unmixing ----
    #[error("within-class scatter is singular even after ridge regularization")]
    SingularScatter,
    #[error("representatives project to the same point; no axis to measure along")]
    DegenerateRepresentatives,
    #[error("no pixels in the {which} relative-availability band")]
    EmptyBand { which: &'static str },
    #[error("mixture endmembers are identical; abundance is undefined")]
    IdenticalEndmembers,

    // ---- reporting ----
    #[error("need at least two usable sites to correlate, got {got}")]
    TooFewSites { got: usize },
}

impl Error {
    /// Which coarse class this error belongs to.
    pub fn class(&self) -> ErrorClass {
        use Error::*;
        match self {
            MalformedHeader { .. }
            | SizeMismatch { .. }
            | UnsupportedDataType { .. }
            | IoFailure { .. }
            | EmptyLibrary { .. }
            | NonMonotonicWavelengths { .. }
            | RangeOutOfBounds { .. }
            | MalformedConfig { .. }
            | InvalidSpec { .. }
            | LengthMismatch { .. }
            | GridMismatch { .. }
            | MissingEsun { .. }
            | OutOfRangeBand { .. } => ErrorClass::Input,

            AlreadyReflectance
            | StillRadiance
            | SunBelowHorizon { .. }
            | TooFewPixels { .. }
            | EmptyClass { .. }
            | EmptySubclass { .. }
            | SoilClassUndetermined
            | EmptyBand { .. }
            | TooFewSites { .. } => ErrorClass::Precondition,

            Stage { source, .. } => source.class(),

            ZeroVector
            | ZeroVariance
            | DegenerateCurve { .. }
            | RankDeficient { .. }
            | SingularScatter
            | DegenerateRepresentatives
            | IdenticalEndmembers => ErrorClass::Numerical,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
