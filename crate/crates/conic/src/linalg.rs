//! Small dense helpers for symmetric matrices.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{ConicError, Result};
use crate::expr::SymMatrixExpr;

/// Absolute asymmetry accepted by [`min_eig`] and friends, scaled by the
/// largest entry magnitude when that exceeds one.
pub const SYMMETRY_TOL: f64 = 1e-12;

/// Largest `|m_ij - m_ji|`.
pub fn asymmetry(m: &DMatrix<f64>) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0_f64;
    for j in 0..n {
        for i in (j + 1)..n {
            worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    worst
}

pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

fn check_symmetric(m: &DMatrix<f64>) -> Result<()> {
    if !m.is_square() {
        return Err(ConicError::DimensionMismatch(format!(
            "expected a square matrix, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    let scale = m.amax().max(1.0);
    let asym = asymmetry(m);
    if asym > SYMMETRY_TOL * scale {
        return Err(ConicError::NotSymmetric { asymmetry: asym });
    }
    Ok(())
}

/// Eigenvalues of a symmetric matrix in ascending order.
pub fn sym_eigenvalues(m: &DMatrix<f64>) -> Result<Vec<f64>> {
    check_symmetric(m)?;
    Ok(sorted_eigenvalues(m))
}

/// Ascending eigenvalues of the symmetric part; no symmetry check.
pub(crate) fn sorted_eigenvalues(m: &DMatrix<f64>) -> Vec<f64> {
    if m.nrows() == 0 {
        return Vec::new();
    }
    let eig = SymmetricEigen::new(symmetrize(m));
    let mut v: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    v.sort_by(|a, b| a.total_cmp(b));
    v
}

pub fn min_eig(m: &DMatrix<f64>) -> Result<f64> {
    Ok(sym_eigenvalues(m)?.first().copied().unwrap_or(f64::INFINITY))
}

pub fn max_eig(m: &DMatrix<f64>) -> Result<f64> {
    Ok(sym_eigenvalues(m)?.last().copied().unwrap_or(f64::NEG_INFINITY))
}

/// `min_eig(m) >= -tol`.
pub fn psd_check(m: &DMatrix<f64>, tol: f64) -> Result<bool> {
    Ok(min_eig(m)? >= -tol)
}

/// `max_eig(m) <= tol`.
pub fn nsd_check(m: &DMatrix<f64>, tol: f64) -> Result<bool> {
    Ok(max_eig(m)? <= tol)
}

/// Spectral norm (largest singular value).
pub fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0.0;
    }
    m.clone()
        .svd(false, false)
        .singular_values
        .iter()
        .copied()
        .fold(0.0, f64::max)
}

/// Default tolerance for [`schur_reduce`].
pub const SCHUR_TOL: f64 = 1e-10;

/// Schur complement `m11 - m21ᵀ m22⁻¹ m21` of the symmetric block matrix
/// `[[m11, m21ᵀ], [m21, m22]]` with `m22 ≺ 0`.
///
/// With `m22 ≺ 0` the block matrix is negative semidefinite exactly when the
/// returned matrix is.
pub fn schur_reduce(
    m11: &DMatrix<f64>,
    m21: &DMatrix<f64>,
    m22: &DMatrix<f64>,
    tol: f64,
) -> Result<SymMatrixExpr> {
    check_symmetric(m11)?;
    check_symmetric(m22)?;
    if m21.nrows() != m22.nrows() || m21.ncols() != m11.nrows() {
        return Err(ConicError::DimensionMismatch(format!(
            "m21 is {}x{}, expected {}x{}",
            m21.nrows(),
            m21.ncols(),
            m22.nrows(),
            m11.nrows()
        )));
    }
    let top = max_eig(m22)?;
    if top >= -tol {
        return Err(ConicError::SingularBlock { max_eig: top });
    }
    // m22 ≺ 0, so -m22 admits a Cholesky factorisation.
    let neg = -m22;
    let chol = neg
        .cholesky()
        .ok_or(ConicError::SingularBlock { max_eig: top })?;
    let solved = chol.solve(m21);
    let reduced = m11 + m21.transpose() * solved;
    Ok(SymMatrixExpr::constant(symmetrize(&reduced)))
}

/// Assemble the dense symmetric matrix `[[m11, m21ᵀ], [m21, m22]]`.
pub fn block2(m11: &DMatrix<f64>, m21: &DMatrix<f64>, m22: &DMatrix<f64>) -> DMatrix<f64> {
    let n1 = m11.nrows();
    let n2 = m22.nrows();
    let mut out = DMatrix::zeros(n1 + n2, n1 + n2);
    out.view_mut((0, 0), (n1, n1)).copy_from(m11);
    out.view_mut((n1, 0), (n2, n1)).copy_from(m21);
    out.view_mut((0, n1), (n1, n2)).copy_from(&m21.transpose());
    out.view_mut((n1, n1), (n2, n2)).copy_from(m22);
    out
}
