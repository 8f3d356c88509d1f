//! Small dense symmetric matrix helpers.

use nalgebra::DMatrix;

use crate::error::NumericsError;

/// Largest condition number accepted before a matrix is treated as singular.
pub const MAX_CONDITION: f64 = 1e10;

/// Inverse of a symmetric positive-definite matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SpdInverse {
    pub inverse: DMatrix<f64>,
    /// Ratio of extreme eigenvalues.
    pub condition: f64,
}

/// Ratio of the largest to the smallest eigenvalue; infinite when the
/// smallest is not positive.
pub fn condition_number(m: &DMatrix<f64>) -> f64 {
    let eig = m.clone().symmetric_eigenvalues();
    let max = eig.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = eig.iter().cloned().fold(f64::INFINITY, f64::min);
    if min <= 0.0 || !min.is_finite() {
        f64::INFINITY
    } else {
        max / min
    }
}

pub fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    m.clone().symmetric_eigenvalues().iter().cloned().fold(f64::INFINITY, f64::min)
}

/// Inverts via Cholesky; near-singular input is an error.
pub fn invert_spd(m: &DMatrix<f64>) -> Result<SpdInverse, NumericsError> {
    if m.nrows() != m.ncols() || m.nrows() == 0 {
        return Err(NumericsError::Domain("expected a non-empty square matrix".into()));
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(NumericsError::Singular { condition: f64::INFINITY });
    }
    let condition = condition_number(m);
    if condition > MAX_CONDITION {
        return Err(NumericsError::Singular { condition });
    }
    let chol = m.clone().cholesky().ok_or(NumericsError::Singular { condition })?;
    Ok(SpdInverse { inverse: chol.inverse(), condition })
}

/// `vᵀ M v`.
pub fn quadratic_form(m: &DMatrix<f64>, v: &[f64]) -> f64 {
    let n = v.len();
    let mut acc = 0.0;
    for i in 0..n {
        for j in 0..n {
            acc += v[i] * m[(i, j)] * v[j];
        }
    }
    acc
}
