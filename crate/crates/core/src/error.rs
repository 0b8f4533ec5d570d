use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("degenerate polygon: zero area")]
    DegeneratePolygon,

    #[error("polygon is not simple: edges {0} and {1} intersect")]
    SelfIntersectingPolygon(usize, usize),

    #[error("discretization produced zero resulting points")]
    EmptyDiscretization,

    #[error("m = 0: no sample points")]
    NoSamplePoints,

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("n = 0: at least one robot is required")]
    NoRobots,

    #[error("non-positive mass {value:e} at sample point {index}")]
    NonPositiveMass { index: usize, value: f64 },

    #[error("config: {0}")]
    Config(String),

    #[error("gamma = {gamma} is below the estimator bound min_gamma = {bound:.6}")]
    GammaBelowBound { gamma: f64, bound: f64 },

    #[error("unknown robot id {0}")]
    UnknownRobot(u64),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}
