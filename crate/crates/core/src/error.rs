use thiserror::Error;

/// Errors raised by the library. Every variant except `Io`, `Csv` and `Json`
/// is a precondition violation on the caller's input.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("sampler returned non-finite value {value} at cell {cell:?} (center {center:?})")]
    NonFinite {
        cell: Vec<usize>,
        center: Vec<f64>,
        value: f64,
    },

    #[error("invalid exponent: {0}")]
    InvalidExponent(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("level {level} exceeds grid depth {depth}")]
    DepthOutOfRange { level: u32, depth: u32 },

    #[error("scale factor {0} is not a signed power of two")]
    NotPowerOfTwo(f64),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("not enough data for a fit: {0}")]
    TooFewLevels(String),

    #[error("non-positive mass {mass} at level {k}")]
    NonPositiveMass { k: i64, mass: f64 },

    #[error("input is not an indicator function (value {value} at cell {cell})")]
    NotIndicator { cell: usize, value: f64 },

    #[error("triangle count {requested} exceeds cap {cap}")]
    CapExceeded { requested: u64, cap: u64 },

    #[error("query point {point:?} lies on the image of the boundary (distance {distance:e})")]
    OnBoundaryImage { point: Vec<f64>, distance: f64 },

    #[error("hypothesis violated: {0}")]
    Hypothesis(String),

    #[error("empty input: {0}")]
    Empty(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for errors caused by invalid input rather than the environment.
    pub fn is_precondition(&self) -> bool {
        !matches!(self, Error::Io(_) | Error::Csv(_) | Error::Json(_))
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
