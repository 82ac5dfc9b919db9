use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("profile error: {0}")]
    Profile(String),
    #[error("checker error: {0}")]
    Checker(String),
    #[error("potential is negative at node {node} (r = {r})")]
    NegativePotential { node: usize, r: f64 },
    #[error("attractive part is not negative at node {node} (r = {r})")]
    SignViolation { node: usize, r: f64 },
    #[error("unsupported split: {0}")]
    UnsupportedSplit(String),
    #[error("degenerate radius: {0}")]
    DegenerateRadius(String),
    #[error("hypothesis violated: margin {margin} (need {needed})")]
    Hypothesis { margin: f64, needed: String },
    #[error("tail bound error: {0}")]
    TailBound(String),
    #[error("stencil error: {0}")]
    Stencil(String),
    #[error("rejected problem: {0}")]
    Rejected(String),
    #[error("singular system at row {0}")]
    Singular(usize),
    #[error("objects live on different grids")]
    MismatchedGrids,
    #[error("derivative samples are required for {0}")]
    MissingDerivative(String),
    #[error("size error: {0}")]
    Size(String),
    #[error("time window T = {t} exceeds the traversal guard {guard}; enlarge r_max or shorten T")]
    Guard { t: f64, guard: f64 },
    #[error("every lattice point exceeded the leak threshold; leak histogram (decades from 1e-8 upward): {histogram:?}")]
    AllContaminated { histogram: Vec<usize> },
    #[error("config error at `{path}`: {message}")]
    Config { path: String, message: String },
    #[error("io error: {0}")]
    Io(String),
    #[error("internal error: {0}")]
    Internal(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn config(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            path: path.into(),
            message: message.into(),
        }
    }
}
