//! Small dense linear-algebra helpers used throughout the crate.
//!
//! Everything here works on `nalgebra` dynamic matrices. Solves go through
//! Cholesky factors; explicit inverses are never formed. Entries of a
//! symmetric inverse that closed forms need are obtained by solving against
//! unit vectors.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};

/// Relative eigenvalue floor for positive-definiteness checks.
pub const PD_TOL_FACTOR: f64 = 1e-10;
/// Relative singular-value floor for rank checks.
pub const RANK_TOL_FACTOR: f64 = 1e-10;
/// Absolute/relative tolerance for symmetry checks.
pub const SYMMETRY_TOL: f64 = 1e-9;
/// Condition numbers above this make bias ratios untrustworthy.
pub const CONDITION_LIMIT: f64 = 1e12;
/// Dense desk-scale cap on matrix dimensions.
pub const DIMENSION_CAP: usize = 64;

/// Max-abs deviation from symmetry, relative to `max(1, max|entry|)`.
pub fn asymmetry(m: &DMatrix<f64>) -> f64 {
    let scale = m.amax().max(1.0);
    let mut worst = 0.0_f64;
    for i in 0..m.nrows() {
        for j in (i + 1)..m.ncols() {
            worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    worst / scale
}

pub fn is_symmetric(m: &DMatrix<f64>) -> bool {
    m.is_square() && asymmetry(m) <= SYMMETRY_TOL
}

/// `(m + mᵀ)/2`; used to clean rounding noise before factorizations.
pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// Checks that a symmetric matrix is positive definite: its smallest
/// eigenvalue must exceed `PD_TOL_FACTOR × max(λ_max, 1)`.
pub fn check_positive_definite(m: &DMatrix<f64>, what: &str) -> Result<()> {
    if !m.is_square() {
        return Err(Error::DimensionMismatch(format!(
            "{what} must be square, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    if !is_symmetric(m) {
        return Err(Error::InvalidModel(format!(
            "{what} is not symmetric (relative asymmetry {:.3e})",
            asymmetry(m)
        )));
    }
    let eig = symmetrize(m).symmetric_eigen();
    let max = eig.eigenvalues.max();
    let min = eig.eigenvalues.min();
    let tol = PD_TOL_FACTOR * max.max(1.0);
    if !(min > tol) {
        return Err(Error::InvalidModel(format!(
            "{what} is not positive definite (min eigenvalue {min:.3e}, tolerance {tol:.3e})"
        )));
    }
    Ok(())
}

/// Cholesky factorization of a symmetric PD matrix, with a descriptive error.
pub fn cholesky(m: &DMatrix<f64>, what: &str) -> Result<Cholesky<f64, Dyn>> {
    Cholesky::new(symmetrize(m)).ok_or_else(|| {
        Error::InvalidModel(format!("{what} has no Cholesky factor (not positive definite)"))
    })
}

/// `log det` of the factored matrix, read off the factor's diagonal.
pub fn log_det(chol: &Cholesky<f64, Dyn>) -> f64 {
    2.0 * chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>()
}

/// Column `i` of the inverse of a symmetric PD matrix, via one solve
/// against the unit vector.
pub fn inverse_column(chol: &Cholesky<f64, Dyn>, i: usize) -> DVector<f64> {
    let n = chol.l_dirty().nrows();
    let mut e = DVector::zeros(n);
    e[i] = 1.0;
    chol.solve(&e)
}

/// Eigenvalue condition number of a symmetric PD matrix.
pub fn condition_number(m: &DMatrix<f64>) -> f64 {
    let eig = symmetrize(m).symmetric_eigen();
    let max = eig.eigenvalues.iter().cloned().fold(f64::MIN, f64::max);
    let min = eig.eigenvalues.iter().cloned().fold(f64::MAX, f64::min);
    if min <= 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Largest singular value.
pub fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    m.singular_values().max()
}

/// Rejects matrices beyond the desk-scale dimension cap.
pub fn check_dimension_cap(d: usize, l: usize) -> Result<()> {
    if d > DIMENSION_CAP || l > DIMENSION_CAP {
        return Err(Error::InvalidModel(format!(
            "dimensions {d}x{l} exceed the configured cap of {DIMENSION_CAP}"
        )));
    }
    Ok(())
}

pub fn all_finite_vec(v: &DVector<f64>) -> bool {
    v.iter().all(|x| x.is_finite())
}

pub fn all_finite_mat(m: &DMatrix<f64>) -> bool {
    m.iter().all(|x| x.is_finite())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pd_check_rejects_indefinite() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(check_positive_definite(&m, "test").is_err());
    }

    #[test]
    fn pd_check_accepts_identity() {
        let m = DMatrix::identity(3, 3);
        check_positive_definite(&m, "test").unwrap();
    }

    #[test]
    fn pd_tolerance_scales_with_largest_eigenvalue() {
        // min/max eigenvalue ratio 1e-12 < 1e-10: numerically singular.
        let m = DMatrix::from_diagonal(&DVector::from_vec(vec![1e12, 1.0_f64]));
        assert!(check_positive_definite(&m, "test").is_err());
        let ok = DMatrix::from_diagonal(&DVector::from_vec(vec![1e6, 1.0_f64]));
        check_positive_definite(&ok, "test").unwrap();
    }

    #[test]
    fn inverse_column_matches_direct_inverse() {
        let m = DMatrix::from_row_slice(3, 3, &[4.0, 1.0, 0.5, 1.0, 3.0, 0.2, 0.5, 0.2, 2.0]);
        let chol = cholesky(&m, "m").unwrap();
        let col = inverse_column(&chol, 1);
        let inv = m.clone().try_inverse().unwrap();
        for r in 0..3 {
            assert!((col[r] - inv[(r, 1)]).abs() < 1e-12);
        }
    }

    #[test]
    fn log_det_matches_lu_determinant() {
        let m = DMatrix::from_row_slice(2, 2, &[2.0, 0.3, 0.3, 1.5]);
        let chol = cholesky(&m, "m").unwrap();
        assert!((log_det(&chol) - m.determinant().ln()).abs() < 1e-12);
    }
}
