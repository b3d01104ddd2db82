use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("mass entry {index} is not strictly positive ({value})")]
    NonPositiveMass { index: usize, value: f64 },

    #[error("iterative eigensolver did not converge after {iterations} iterations (residual {residual:.3e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("zero vector has no Rayleigh quotient")]
    ZeroVector,

    #[error("parameter out of range: {0}")]
    OutOfRange(String),

    #[error("invalid cell: {0}")]
    InvalidCell(String),

    #[error("invalid group data: {0}")]
    InvalidGroup(String),

    #[error("generator arity mismatch: expected {expected}, got {got}")]
    ArityMismatch { expected: usize, got: usize },

    #[error("representation fails a relation check: {0}")]
    RelationCheck(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("requested {requested} eigenvalues but only {available} exist")]
    TooManyEigenvalues { requested: usize, available: usize },

    #[error("{path}:{line}: {message}")]
    Parse { path: String, line: usize, message: String },

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
