use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("point ({0}, {1}, {2}) lies outside the grid")]
    OutOfBounds(f64, f64, f64),

    #[error("voxel index ({0}, {1}, {2}) lies outside the grid")]
    VoxelOutOfBounds(i64, i64, i64),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("cave generation exhausted its retry budget ({attempts} bore attempts)")]
    GenerationFailed { attempts: usize },

    #[error("numeric failure: {0}")]
    NumericFailure(String),

    #[error("consecutive trajectory nodes coincide at index {0}")]
    DuplicateNode(usize),

    #[error("time {t} outside trajectory range [{t0}, {t2}]")]
    TimeOutOfRange { t: f64, t0: f64, t2: f64 },

    #[error("displacement ({0}, {1}, {2}) outside cost-table range")]
    TableRange(i32, i32, i32),

    #[error("zero displacement has no cost-table entry")]
    ZeroDisplacement,

    #[error("cost table was built for different parameters (hash {file:#x}, expected {expected:#x})")]
    StaleTable { file: u64, expected: u64 },

    #[error("stop-stop maneuver ({0}, {1}, {2}) failed to settle within the timeout")]
    SettleTimeout(i32, i32, i32),

    #[error("cross-medium edges must be vertical; got displacement ({0}, {1}, {2})")]
    NonVerticalTransition(i32, i32, i32),

    #[error("vehicle diverged: {0}")]
    Diverged(String),

    #[error("no endpoint candidates in {medium} with margin {margin} m")]
    NoEndpointCandidates { medium: String, margin: f64 },

    #[error("graph node {0} does not exist")]
    UnknownNode(usize),

    #[error("malformed {what} file: {detail}")]
    Format { what: String, detail: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn format(what: &str, detail: impl Into<String>) -> Self {
        Error::Format {
            what: what.to_string(),
            detail: detail.into(),
        }
    }
}
