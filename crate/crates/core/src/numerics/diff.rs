//! Central-difference derivatives.

use nalgebra::DMatrix;

use crate::error::NumericsError;

/// Default relative step for first derivatives.
pub const GRADIENT_STEP: f64 = 1e-6;
/// Default relative step for second derivatives.
pub const HESSIAN_STEP: f64 = 1e-4;

fn step_for(x: f64, rel: f64) -> f64 {
    rel * x.abs().max(1.0)
}

fn probe<F: FnMut(&[f64]) -> f64>(f: &mut F, x: &[f64]) -> Result<f64, NumericsError> {
    let v = f(x);
    if v.is_finite() {
        Ok(v)
    } else {
        Err(NumericsError::NonFinite { at: x.to_vec() })
    }
}

/// Gradient by central differences with per-coordinate step `rel_step·max(1, |x_i|)`.
pub fn numeric_gradient<F>(mut f: F, x: &[f64], rel_step: f64) -> Result<Vec<f64>, NumericsError>
where
    F: FnMut(&[f64]) -> f64,
{
    let mut work = x.to_vec();
    let mut grad = Vec::with_capacity(x.len());
    for i in 0..x.len() {
        let h = step_for(x[i], rel_step);
        work[i] = x[i] + h;
        let up = probe(&mut f, &work)?;
        work[i] = x[i] - h;
        let down = probe(&mut f, &work)?;
        work[i] = x[i];
        // use the realized step so representation error in x ± h cancels
        grad.push((up - down) / ((x[i] + h) - (x[i] - h)));
    }
    Ok(grad)
}

/// Hessian by central differences, symmetrized as `(H + Hᵀ)/2`.
pub fn numeric_hessian<F>(mut f: F, x: &[f64], rel_step: f64) -> Result<DMatrix<f64>, NumericsError>
where
    F: FnMut(&[f64]) -> f64,
{
    let d = x.len();
    let h: Vec<f64> = x.iter().map(|&xi| step_for(xi, rel_step)).collect();
    let mut work = x.to_vec();
    let f0 = probe(&mut f, x)?;
    let mut hess = DMatrix::zeros(d, d);
    for i in 0..d {
        work[i] = x[i] + h[i];
        let up = probe(&mut f, &work)?;
        work[i] = x[i] - h[i];
        let down = probe(&mut f, &work)?;
        work[i] = x[i];
        hess[(i, i)] = (up - 2.0 * f0 + down) / (h[i] * h[i]);
        for j in 0..i {
            let mut corner = |si: f64, sj: f64, work: &mut Vec<f64>| {
                work[i] = x[i] + si * h[i];
                work[j] = x[j] + sj * h[j];
                let v = probe(&mut f, work);
                work[i] = x[i];
                work[j] = x[j];
                v
            };
            let pp = corner(1.0, 1.0, &mut work)?;
            let pm = corner(1.0, -1.0, &mut work)?;
            let mp = corner(-1.0, 1.0, &mut work)?;
            let mm = corner(-1.0, -1.0, &mut work)?;
            let v = (pp - pm - mp + mm) / (4.0 * h[i] * h[j]);
            hess[(i, j)] = v;
            hess[(j, i)] = v;
        }
    }
    Ok((&hess + hess.transpose()) * 0.5)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gradient_examples() {
        let g = numeric_gradient(|x| x[0] * x[0], &[3.0], GRADIENT_STEP).unwrap();
        assert!((g[0] - 6.0).abs() < 1e-6);
        let g = numeric_gradient(|_| 4.2, &[1.0, -2.0], GRADIENT_STEP).unwrap();
        assert_eq!(g, vec![0.0, 0.0]);
        let g = numeric_gradient(|x| x[0].exp(), &[0.0], GRADIENT_STEP).unwrap();
        assert!((g[0] - 1.0).abs() < 1e-6);
    }

    #[test]
    fn gradient_reports_non_finite_probe() {
        let err = numeric_gradient(|x| x[0].ln(), &[0.0], GRADIENT_STEP).unwrap_err();
        assert!(matches!(err, NumericsError::NonFinite { .. }));
    }

    #[test]
    fn hessian_is_symmetric() {
        let f = |x: &[f64]| x[0] * x[0] * x[1] + 3.0 * x[1].powi(3) - x[0] * x[1];
        let h = numeric_hessian(f, &[1.3, -0.7], HESSIAN_STEP).unwrap();
        assert_eq!(h[(0, 1)], h[(1, 0)]);
        assert!((h[(0, 0)] - 2.0 * -0.7).abs() < 1e-6);
        assert!((h[(0, 1)] - (2.0 * 1.3 - 1.0)).abs() < 1e-6);
        assert!((h[(1, 1)] - 18.0 * -0.7).abs() < 1e-6);
    }
}
