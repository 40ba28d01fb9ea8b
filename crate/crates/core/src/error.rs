use thiserror::Error;

/// Errors raised anywhere in the discretization pipeline.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum HdgError {
    #[error("argument {x} outside of [-1, 1]")]
    Domain { x: f64 },

    #[error("unsupported dimension {0}")]
    UnsupportedDimension(usize),

    #[error("polynomial order must be at least 1, got {0}")]
    InvalidOrder(usize),

    #[error("point {0:?} lies outside the reference element")]
    OutsideElement(Vec<f64>),

    #[error("index {index} out of range (len {len})")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("singular element map (det = {0:e})")]
    SingularJacobian(f64),

    #[error("singular local block on element {0}")]
    SingularLocalBlock(usize),

    #[error("singular local moment system on element {0}")]
    SingularMomentSystem(usize),

    #[error("operation requires relaxed conformity")]
    RequiresRelaxed,

    #[error("linear solver failed: {0}")]
    SolverBreakdown(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("mesh format error: {0}")]
    MeshFormat(String),

    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for HdgError {
    fn from(e: std::io::Error) -> Self {
        HdgError::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, HdgError>;
