use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Ordinary least squares via SVD. Fails when `x` is numerically rank
/// deficient.
pub(crate) fn least_squares(x: &DMatrix<f64>, y: &[f64]) -> Result<Vec<f64>> {
    let svd = x.clone().svd(true, true);
    let sv = &svd.singular_values;
    let max = sv.max();
    let min = sv.min();
    if !(min > 1e-10 * max) {
        return Err(Error::SingularDesign(format!(
            "regression design is rank deficient (singular value ratio {:.3e})",
            min / max
        )));
    }
    let b = DVector::from_column_slice(y);
    let beta = svd
        .solve(&b, 0.0)
        .map_err(|e| Error::Internal(format!("least squares solve failed: {e}")))?;
    Ok(beta.iter().copied().collect())
}

/// 2-norm condition number.
pub(crate) fn condition_number(a: &DMatrix<f64>) -> f64 {
    let sv = a.clone().svd(false, false).singular_values;
    let min = sv.min();
    if min == 0.0 {
        f64::INFINITY
    } else {
        sv.max() / min
    }
}
