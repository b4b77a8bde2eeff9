use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },

    #[error("matrix contains non-finite entries")]
    NonFinite,

    #[error("invalid tolerance profile: {0}")]
    InvalidTolerance(String),

    #[error("operator is not a contraction (I - T*T has eigenvalue {min_eigenvalue:.3e})")]
    NotAContraction { min_eigenvalue: f64 },

    #[error("operator is not an isometry (residual {residual:.3e})")]
    NotAnIsometry { residual: f64 },

    #[error("tuple is not isometric: {0}")]
    NonIsometricTuple(String),

    #[error("T^{power} is not a partial isometry (residual {residual:.3e})")]
    NotPowerPartialIsometry { power: usize, residual: f64 },

    #[error("subspace is not contained in the ambient subspace (residual {residual:.3e})")]
    ContainmentViolation { residual: f64 },

    #[error("tuple relations fail: {0}")]
    RelationFailure(String),

    #[error("slice {label} lost the reducing property for T_{index} (residual {residual:.3e})")]
    ReducingBlowup {
        label: String,
        index: usize,
        residual: f64,
    },

    #[error("index {index} out of range for a tuple of length {len}")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("invalid twist: {0}")]
    InvalidTwist(String),

    #[error("invalid permutation: {0}")]
    InvalidPermutation(String),

    #[error("invalid lattice data: {0}")]
    Lattice(String),

    #[error("inadmissible lattice index {0}")]
    InadmissibleIndex(String),

    #[error("window too small: interior is empty")]
    WindowTooSmall,

    #[error("invalid model parameters: {0}")]
    InvalidParameter(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
