use nalgebra::SymmetricEigen;

use crate::error::{Error, Result};
use crate::Matrix;

/// Scale-aware strictness margin: `1e-9·(1 + max |entry|)`.
pub fn feasibility_eps(m: &Matrix) -> f64 {
    1e-9 * (1.0 + m.amax())
}

fn check_symmetric(m: &Matrix) -> Result<()> {
    if !m.is_square() {
        return Err(Error::DimensionMismatch {
            expected: m.nrows(),
            actual: m.ncols(),
            context: "square matrix",
        });
    }
    let asym = (m - m.transpose()).amax();
    if asym > 1e-12 * (1.0 + m.amax()) {
        return Err(Error::NotSymmetric(asym));
    }
    Ok(())
}

/// Largest eigenvalue of a symmetric matrix.
pub fn max_eigenvalue(m: &Matrix) -> Result<f64> {
    check_symmetric(m)?;
    if m.is_empty() {
        return Ok(f64::NEG_INFINITY);
    }
    let sym = (m + m.transpose()) * 0.5;
    Ok(SymmetricEigen::new(sym).eigenvalues.max())
}

/// `λ_max(M) < −eps`.
pub fn is_negative_definite(m: &Matrix, eps: f64) -> Result<bool> {
    Ok(max_eigenvalue(m)? < -eps)
}
