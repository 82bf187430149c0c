use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("summed-area tables require a lattice design")]
    ScatterUnsupported,
    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("weight at index {0} is not strictly positive")]
    NonpositiveWeight(usize),
    #[error("no nonempty block [u, v] with u <= x0 <= v exists at the query point")]
    NoFeasibleBlock,
    #[error("empty series")]
    EmptySeries,
    #[error("query {0} lies outside the observed range")]
    OutOfRange(f64),
    #[error("query {0} lies outside the support of the data")]
    OutOfSupport(f64),
    #[error("lattice axis {axis} has {len} points, need at least {min}")]
    TooSmallAxis { axis: usize, len: usize, min: usize },
    #[error("dimension {0} is not supported here")]
    UnsupportedDim(usize),
    #[error("partial derivative {index} = {value} is not strictly positive")]
    NonpositivePartial { index: usize, value: f64 },
    #[error("local fit has no positive weights")]
    DegenerateNeighborhood,
    #[error("{failed} of {total} replications failed (limit 0.1%)")]
    ReplicationFailures { failed: usize, total: usize },
    #[error("invalid design: {0}")]
    InvalidDesign(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("expression error: {0}")]
    Expr(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
