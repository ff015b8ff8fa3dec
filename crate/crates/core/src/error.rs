use thiserror::Error;

/// Errors raised while reading or validating a mesh.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum MeshError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("line {line}: triangle {id} has non-positive signed area {area:e} (clockwise or degenerate)")]
    Orientation { line: usize, id: usize, area: f64 },
    #[error("line {line}: {msg}")]
    NonConforming { line: usize, msg: String },
    #[error("line {line}: boundary edge ({a}, {b}) carries no marker")]
    UnmarkedBoundary { line: usize, a: usize, b: usize },
    #[error("mesh has no Dirichlet boundary")]
    NoDirichlet,
    #[error("{0}")]
    Invalid(String),
}

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("index {index} out of range (len {len})")]
    OutOfRange { index: usize, len: usize },
    #[error("singular matrix: zero pivot at row {row}")]
    Singular { row: usize },
    #[error("active set did not settle after {iterations} iterations (last change: {last_delta} nodes)")]
    PdasNotConverged { iterations: usize, last_delta: usize },
    #[error("tangential contact residual {residual:e} at node {node} exceeds tolerance")]
    TangentialResidual { node: usize, residual: f64 },
    #[error("negative contact density {value:e} at node {node}")]
    NegativeDensity { node: usize, value: f64 },
    #[error("level {level}: {source}")]
    AtLevel {
        level: usize,
        #[source]
        source: Box<Error>,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
