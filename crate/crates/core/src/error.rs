use std::path::PathBuf;

/// Errors raised by the library. CLI code wraps these with stage context.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("malformed EMB1 header: {0}")]
    MalformedHeader(String),
    #[error("truncated embedding payload: expected {expected} bytes, found {found}")]
    TruncatedData { expected: usize, found: usize },
    #[error("non-finite value at row {row}, column {col}")]
    NonFiniteValue { row: usize, col: usize },
    #[error("row {0} has zero norm")]
    ZeroNormRow(usize),
    #[error("dimension mismatch: {left} vs {right}")]
    DimMismatch { left: usize, right: usize },
    #[error("invalid manifest: {0}")]
    InvalidManifest(String),

    #[error("pool of {pool} candidates is too small to select {requested}")]
    PoolTooSmall { pool: usize, requested: usize },
    #[error("cluster {0} is empty")]
    EmptyCluster(usize),
    #[error("point {0} has a degenerate (near-zero) affinity row")]
    DegenerateAffinity(usize),
    #[error("eigendecomposition failed: {0}")]
    Eigensolver(String),

    #[error("mask has no foreground pixels")]
    EmptyMask,
    #[error("mask is {mask_w}x{mask_h} but its image is {image_w}x{image_h}")]
    MaskSizeMismatch {
        mask_w: u32,
        mask_h: u32,
        image_w: u32,
        image_h: u32,
    },
    #[error("box {bbox:?} lies outside a {width}x{height} image")]
    BoxOutOfBounds {
        bbox: [u32; 4],
        width: u32,
        height: u32,
    },
    #[error("patch {patch_w}x{patch_h} cannot fit a {bg_w}x{bg_h} background at scale {scale}")]
    PatchTooLarge {
        patch_w: u32,
        patch_h: u32,
        bg_w: u32,
        bg_h: u32,
        scale: f64,
    },
    #[error("missing asset {0}")]
    MissingAsset(PathBuf),
    #[error("background pool is empty")]
    EmptyBackgroundPool,

    #[error("index {index} out of range for {len} entries")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("{detections} detections but {rows} crop embeddings")]
    AlignmentMismatch { detections: usize, rows: usize },
    #[error("unknown category {0:?}")]
    UnknownCategory(String),

    #[error("no detections to evaluate")]
    NoDetections,
    #[error("no ground truth for class {0:?}")]
    NoGroundTruth(String),

    #[error("invalid configuration: {0}")]
    ConfigInvalid(String),
    #[error("{stage} stage failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("json error in {path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("image error on {path}: {source}")]
    Image {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn json(path: impl Into<PathBuf>, source: serde_json::Error) -> Self {
        Error::Json {
            path: path.into(),
            source,
        }
    }
}
