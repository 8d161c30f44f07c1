use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("matrix must be square, got {nrows}x{ncols}")]
    NotSquare { nrows: usize, ncols: usize },

    #[error("invalid sparse structure: {0}")]
    InvalidStructure(String),

    #[error("matrix market parse error on line {line}: {msg}")]
    MatrixMarket { line: usize, msg: String },

    #[error("i/o error: {0}")]
    Io(String),

    #[error("matrix is structurally singular: no perfect matching ({matched} of {n} columns matched)")]
    StructurallySingular { matched: usize, n: usize },

    #[error("symmetrizer pattern is empty")]
    EmptyPattern,

    #[error("symmetrizer unknown S({row},{col}) touches no equation")]
    UnreachableUnknown { row: usize, col: usize },

    #[error("least-squares problem is rank deficient in columns {columns:?}")]
    RankDeficient { columns: Vec<usize> },

    #[error("zero pivot encountered during factorization at column {column}")]
    ZeroPivot { column: usize },

    #[error("matrix is not positive definite (pivot {column})")]
    NotPositiveDefinite { column: usize },

    #[error("singular dense core matrix in the low-rank correction")]
    SingularCore,

    #[error("malformed block structure: {0}")]
    MalformedBlocks(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
