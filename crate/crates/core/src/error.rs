use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("scale {scale} exceeds the configured cap J_max = {cap}")]
    ScaleCap { scale: u32, cap: u32 },
    #[error("root has no parent")]
    RootHasNoParent,
    #[error("invalid cube index: {0}")]
    InvalidCube(String),
    #[error("dimension {0} unsupported (expected 1..=3)")]
    UnsupportedDim(usize),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimMismatch { expected: usize, got: usize },
    #[error("not a proper subtree: {0}")]
    MalformedTree(String),
    #[error("cells do not tile [0,1]^d: {0}")]
    BadPartition(String),
    #[error("invalid measure: {0}")]
    InvalidMeasure(String),
    #[error("density exceeds its bound C_rho = {bound} (observed {observed})")]
    DensityBound { bound: f64, observed: f64 },
    #[error("invalid quadrature: {0}")]
    InvalidQuadrature(String),
    #[error("degenerate cell {0}: mass below floor")]
    DegenerateCell(String),
    #[error("rank deficient basis on cell {cell}: pivot {pivot:e} at monomial {index}")]
    RankDeficient { cell: String, pivot: f64, index: usize },
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("unknown target `{0}`")]
    UnknownTarget(String),
    #[error("non-finite value: {0}")]
    NonFinite(String),
    #[error("io error: {0}")]
    Io(String),
    #[error("format error: {0}")]
    Format(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Format(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Format(e.to_string())
    }
}
