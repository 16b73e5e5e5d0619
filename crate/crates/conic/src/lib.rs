//! Affine linear-matrix-inequality assembly and a dense semidefinite solver.

pub mod error;
pub mod expr;
pub mod linalg;
pub mod problem;
pub mod solver;

pub use error::{ConicError, Result};
pub use expr::{AffineMatrix, BlockSym, SymMatrixExpr};
pub use linalg::{max_eig, min_eig, nsd_check, psd_check, schur_reduce, spectral_norm};
pub use problem::{MatrixVar, Restriction, ScalarVar, SdpProblem, Sense};
pub use solver::{solve, IterationInfo, SdpSolution, SolveStatus, SolverOptions};
