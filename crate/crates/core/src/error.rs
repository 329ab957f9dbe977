use std::path::PathBuf;

use thiserror::Error;

/// Errors raised anywhere in the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("image has no pixel above the mass threshold {min_mass}")]
    AllZeroImage { min_mass: f64 },

    #[error("measure has zero total mass")]
    ZeroTotalMass,

    #[error("invalid measure: {0}")]
    InvalidMeasure(String),

    #[error("unbalanced problem: total supply {supply} vs total demand {demand}")]
    UnbalancedProblem { supply: f64, demand: f64 },

    #[error("instance too large for exhaustive enumeration: {m}x{n} cells (limit 20)")]
    TooLarge { m: usize, n: usize },

    #[error("solver stopped at the iteration limit ({iterations} pivots) before reaching optimality")]
    IterationLimit { iterations: usize },

    #[error("invalid solver options: {0}")]
    InvalidOptions(String),

    #[error("vector lengths differ: {0} vs {1}")]
    LengthMismatch(usize, usize),

    #[error("image shapes differ: {0}x{1} vs {2}x{3}")]
    ShapeMismatch(usize, usize, usize, usize),

    #[error("tangent normal equations are singular")]
    SingularSystem,

    #[error("invalid tangent configuration: {0}")]
    InvalidTangentConfig(String),

    #[error("training set is empty")]
    EmptyTrainingSet,

    #[error("test set is empty")]
    EmptyTestSet,

    #[error("bad IDX magic number: expected {expected:#010x}, found {found:#010x}")]
    BadMagic { expected: u32, found: u32 },

    #[error("truncated IDX file: expected {expected} bytes, found {found}")]
    TruncatedFile { expected: usize, found: usize },

    #[error("unexpected image dimensions {rows}x{cols} (expected 28x28)")]
    DimensionMismatch { rows: usize, cols: usize },

    #[error("label {value} at index {index} is outside 0..=9")]
    LabelOutOfRange { index: usize, value: u8 },

    #[error("image count {images} does not match label count {labels}")]
    CountMismatch { images: usize, labels: usize },

    #[error("not enough images of digit {digit}: need {needed}, have {available}")]
    InsufficientData { digit: u8, needed: usize, available: usize },

    #[error("image parse error: {0}")]
    ImageParse(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("distance evaluation failed for test #{test} vs train #{train}: {source}")]
    Pair {
        test: usize,
        train: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
