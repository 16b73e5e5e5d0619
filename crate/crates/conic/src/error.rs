use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConicError {
    #[error("matrix is not symmetric (asymmetry {asymmetry:.3e})")]
    NotSymmetric { asymmetry: f64 },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("Schur block is not negative definite (max eigenvalue {max_eig:.3e})")]
    SingularBlock { max_eig: f64 },

    #[error("constraint `{constraint}` references undeclared variable index {index}")]
    UndeclaredVariable { constraint: String, index: usize },

    #[error("invalid solver option: {0}")]
    InvalidOption(String),
}

pub type Result<T> = std::result::Result<T, ConicError>;
