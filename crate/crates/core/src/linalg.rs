//! Small dense helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Relative condition number above which an SPD system counts as singular.
pub const MAX_CONDITION: f64 = 1e12;

/// Submatrix with the given 0-based rows and columns.
pub fn submatrix(m: &DMatrix<f64>, rows: &[usize], cols: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), cols.len(), |a, b| m[(rows[a], cols[b])])
}

/// Column `col` restricted to 0-based `rows`.
pub fn subcolumn(m: &DMatrix<f64>, rows: &[usize], col: usize) -> DVector<f64> {
    DVector::from_fn(rows.len(), |a, _| m[(rows[a], col)])
}

/// Condition number of a symmetric matrix; infinite if not positive definite.
pub fn condition_spd(a: &DMatrix<f64>) -> f64 {
    if a.nrows() == 0 {
        return 1.0;
    }
    let ev = a.clone().symmetric_eigenvalues();
    let (lo, hi) = (ev.min(), ev.max());
    if lo <= 0.0 || !lo.is_finite() || !hi.is_finite() {
        f64::INFINITY
    } else {
        hi / lo
    }
}

/// Inverse of a symmetric positive definite matrix.
pub fn spd_inverse(a: &DMatrix<f64>, context: &str) -> Result<DMatrix<f64>> {
    let cond = condition_spd(a);
    if cond > MAX_CONDITION {
        return Err(Error::Singular {
            context: context.to_string(),
            condition: cond,
        });
    }
    let chol = a.clone().cholesky().ok_or_else(|| Error::Singular {
        context: context.to_string(),
        condition: cond,
    })?;
    Ok(chol.inverse())
}

/// Solves `a x = b` for symmetric positive definite `a`.
pub fn spd_solve(a: &DMatrix<f64>, b: &DVector<f64>, context: &str) -> Result<DVector<f64>> {
    let cond = condition_spd(a);
    if cond > MAX_CONDITION {
        return Err(Error::Singular {
            context: context.to_string(),
            condition: cond,
        });
    }
    let chol = a.clone().cholesky().ok_or_else(|| Error::Singular {
        context: context.to_string(),
        condition: cond,
    })?;
    Ok(chol.solve(b))
}

/// Largest singular value.
pub fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.singular_values().max()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn singular_detected() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        assert!(matches!(spd_inverse(&a, "test"), Err(Error::Singular { .. })));
    }

    #[test]
    fn solve_and_norm() {
        let a = DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 4.0]);
        let x = spd_solve(&a, &DVector::from_vec(vec![2.0, 2.0]), "test").unwrap();
        assert!((x[0] - 1.0).abs() < 1e-15 && (x[1] - 0.5).abs() < 1e-15);
        assert!((spectral_norm(&a) - 4.0).abs() < 1e-12);
        assert!((condition_spd(&a) - 2.0).abs() < 1e-12);
    }
}
