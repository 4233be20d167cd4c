use alloc::string::String;

/// Errors raised by the discretization pipeline.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("mesh needs at least one subdivision per side")]
    EmptyMesh,
    #[error("polynomial degree {0} is not supported (expected 1..=3)")]
    UnsupportedDegree(usize),
    #[error("{kind} quadrature of exactness {requested} exceeds the supported maximum {max}")]
    QuadratureTooHigh {
        kind: &'static str,
        requested: usize,
        max: usize,
    },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("index out of range: {0}")]
    OutOfRange(String),
    #[error("singular local matrix on element {element}: {context}")]
    SingularLocal { element: usize, context: &'static str },
    #[error("linear solve failed: {0}")]
    Solve(String),
    #[error("incompatible layouts: {0}")]
    IncompatibleLayouts(String),
}

pub type Result<T> = core::result::Result<T, Error>;
