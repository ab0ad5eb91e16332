use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid geometry parameters: {0}")]
    InvalidGeometry(String),

    #[error("panel refinement too deep: panel of parameter length {length:e} near t = {at}")]
    ExcessiveGrading { length: f64, at: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("degenerate grid: nodes {i} and {j} coincide")]
    DegenerateGrid { i: usize, j: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("matrix of size {n} exceeds the dense limit {limit}")]
    DenseLimit { n: usize, limit: usize },

    #[error("singular diagonal block {block}")]
    SingularBlock { block: usize },

    #[error("singular coupled core matrix")]
    SingularCore,

    #[error("unequal row rank {row} and column rank {col} at node {node}")]
    UnequalRanks { node: usize, row: usize, col: usize },

    #[error("singular matrix at node {node} (level {level}): {what}")]
    SingularNode {
        node: usize,
        level: usize,
        what: &'static str,
    },

    #[error("malformed {format} data: {msg}")]
    Format { format: &'static str, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
