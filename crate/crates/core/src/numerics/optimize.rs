//! Local maximization: quasi-Newton (BFGS on numeric gradients) with a
//! Nelder–Mead fallback for non-smooth or boundary-hugging objectives.

use serde::{Deserialize, Serialize};

use super::diff::numeric_gradient;
use crate::error::NumericsError;

/// Open interval `(lower, upper)`; either end may be infinite.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bound {
    pub lower: f64,
    pub upper: f64,
}

impl Bound {
    pub const REAL: Bound = Bound { lower: f64::NEG_INFINITY, upper: f64::INFINITY };
    pub const POSITIVE: Bound = Bound { lower: 0.0, upper: f64::INFINITY };

    pub fn new(lower: f64, upper: f64) -> Result<Self, NumericsError> {
        if lower.is_nan() || upper.is_nan() || !(lower < upper) {
            return Err(NumericsError::Domain(format!("degenerate bound ({lower}, {upper})")));
        }
        Ok(Self { lower, upper })
    }

    pub fn contains(&self, x: f64) -> bool {
        x > self.lower && x < self.upper
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimizerSettings {
    /// Relative objective change regarded as stagnation.
    pub rel_tolerance: f64,
    pub max_iterations: usize,
    /// Relative finite-difference step.
    pub gradient_step: f64,
}

impl Default for OptimizerSettings {
    fn default() -> Self {
        Self { rel_tolerance: 1e-8, max_iterations: 500, gradient_step: 1e-6 }
    }
}

impl OptimizerSettings {
    pub fn validate(&self) -> Result<(), NumericsError> {
        if !(self.rel_tolerance > 0.0) || self.max_iterations < 1 || !(self.gradient_step > 0.0) {
            return Err(NumericsError::Domain(format!("invalid optimizer settings {self:?}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Algorithm {
    QuasiNewton,
    NelderMead,
}

/// Outcome of a local maximization.
#[derive(Debug, Clone, PartialEq)]
pub struct Maximum {
    pub argmax: Vec<f64>,
    pub value: f64,
    pub converged: bool,
    pub iterations: usize,
    pub algorithm: Algorithm,
}

impl Maximum {
    /// Turns a non-converged result into [`NumericsError::NotConverged`].
    pub fn require_converged(self) -> Result<Self, NumericsError> {
        if self.converged {
            Ok(self)
        } else {
            Err(NumericsError::NotConverged {
                iterations: self.iterations,
                best: self.argmax,
                value: self.value,
            })
        }
    }
}

fn inside(x: &[f64], bounds: &[Bound]) -> bool {
    bounds.is_empty() || x.iter().zip(bounds).all(|(&v, b)| b.contains(v))
}

/// Maximizes `f` starting from `init`. Points outside `bounds` (if any) are
/// treated as infeasible. Non-convergence is reported through
/// [`Maximum::converged`], not as an error.
pub fn maximize<F>(
    f: F,
    init: &[f64],
    bounds: &[Bound],
    settings: &OptimizerSettings,
) -> Result<Maximum, NumericsError>
where
    F: Fn(&[f64]) -> f64,
{
    settings.validate()?;
    if !bounds.is_empty() && bounds.len() != init.len() {
        return Err(NumericsError::Domain("bounds and initial point differ in dimension".into()));
    }
    if !inside(init, bounds) {
        return Err(NumericsError::Domain(format!("initial point {init:?} outside bounds")));
    }
    let f0 = f(init);
    if !f0.is_finite() {
        return Err(NumericsError::NonFinite { at: init.to_vec() });
    }
    if init.is_empty() {
        return Ok(Maximum {
            argmax: vec![],
            value: f0,
            converged: true,
            iterations: 0,
            algorithm: Algorithm::QuasiNewton,
        });
    }

    let objective = |x: &[f64]| if inside(x, bounds) { f(x) } else { f64::NEG_INFINITY };
    let qn = quasi_newton(&objective, init, f0, settings);
    if qn.converged {
        return Ok(qn);
    }
    let nm = nelder_mead_maximize(objective, &qn.argmax, settings)?;
    let iterations = qn.iterations + nm.iterations;
    let best = if nm.value >= qn.value { nm } else { Maximum { converged: false, ..qn } };
    Ok(Maximum { iterations, ..best })
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn inf_norm(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, v| m.max(v.abs()))
}

fn quasi_newton<F: Fn(&[f64]) -> f64>(f: &F, init: &[f64], f0: f64, settings: &OptimizerSettings) -> Maximum {
    let n = init.len();
    // Work with the minimization of -f.
    let phi = |x: &[f64]| -f(x);
    let grad = |x: &[f64]| numeric_gradient(phi, x, settings.gradient_step);

    let mut x = init.to_vec();
    let mut fx = -f0;
    let result = |x: &[f64], fx: f64, converged, iterations| Maximum {
        argmax: x.to_vec(),
        value: -fx,
        converged,
        iterations,
        algorithm: Algorithm::QuasiNewton,
    };
    let mut g = match grad(&x) {
        Ok(g) => g,
        Err(_) => return result(&x, fx, false, 0),
    };
    let mut h_inv = vec![0.0; n * n];
    for i in 0..n {
        h_inv[i * n + i] = 1.0;
    }
    let mut first = true;
    let mut stalls = 0;

    for it in 1..=settings.max_iterations {
        if inf_norm(&g) <= 1e-6 * fx.abs().max(1.0) {
            return result(&x, fx, true, it - 1);
        }
        let mut d: Vec<f64> = (0..n).map(|i| -dot(&h_inv[i * n..(i + 1) * n], &g)).collect();
        let mut slope = dot(&d, &g);
        if !(slope < 0.0) {
            for i in 0..n {
                for j in 0..n {
                    h_inv[i * n + j] = if i == j { 1.0 } else { 0.0 };
                }
            }
            first = true;
            d = g.iter().map(|v| -v).collect();
            slope = dot(&d, &g);
        }
        if first {
            let scale = inf_norm(&d).max(1.0);
            d.iter_mut().for_each(|v| *v /= scale);
            slope /= scale;
        }

        let mut alpha = 1.0;
        let mut accepted = None;
        let mut trial = vec![0.0; n];
        while alpha > 1e-14 {
            for i in 0..n {
                trial[i] = x[i] + alpha * d[i];
            }
            let ft = phi(&trial);
            if ft.is_finite() && ft <= fx + 1e-4 * alpha * slope {
                accepted = Some(ft);
                break;
            }
            alpha *= 0.5;
        }
        let Some(f_new) = accepted else {
            return result(&x, fx, false, it);
        };
        let g_new = match grad(&trial) {
            Ok(g) => g,
            Err(_) => return result(&trial, f_new, false, it),
        };
        let s: Vec<f64> = (0..n).map(|i| trial[i] - x[i]).collect();
        let y: Vec<f64> = (0..n).map(|i| g_new[i] - g[i]).collect();
        let sy = dot(&s, &y);
        if sy > 1e-12 * dot(&s, &s).sqrt() * dot(&y, &y).sqrt() {
            if first {
                let gamma = sy / dot(&y, &y);
                for i in 0..n {
                    for j in 0..n {
                        h_inv[i * n + j] = if i == j { gamma } else { 0.0 };
                    }
                }
                first = false;
            }
            let rho = 1.0 / sy;
            let hy: Vec<f64> = (0..n).map(|i| dot(&h_inv[i * n..(i + 1) * n], &y)).collect();
            let yhy = dot(&y, &hy);
            for i in 0..n {
                for j in 0..n {
                    h_inv[i * n + j] += -rho * (hy[i] * s[j] + s[i] * hy[j])
                        + (rho * rho * yhy + rho) * s[i] * s[j];
                }
            }
        }
        let change = (f_new - fx).abs() / fx.abs().max(1.0);
        x.copy_from_slice(&trial);
        fx = f_new;
        g = g_new;
        stalls = if change < settings.rel_tolerance { stalls + 1 } else { 0 };
        if stalls >= 3 {
            return result(&x, fx, true, it);
        }
    }
    result(&x, fx, false, settings.max_iterations)
}

/// Derivative-free maximization by the Nelder–Mead simplex method.
pub fn nelder_mead_maximize<F>(
    f: F,
    init: &[f64],
    settings: &OptimizerSettings,
) -> Result<Maximum, NumericsError>
where
    F: Fn(&[f64]) -> f64,
{
    settings.validate()?;
    let n = init.len();
    let phi = |x: &[f64]| {
        let v = -f(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };
    let f0 = phi(init);
    if !f0.is_finite() {
        return Err(NumericsError::NonFinite { at: init.to_vec() });
    }
    let mut simplex: Vec<(Vec<f64>, f64)> = vec![(init.to_vec(), f0)];
    for i in 0..n {
        let mut v = init.to_vec();
        let step = 0.05 * init[i].abs().max(1.0);
        v[i] += step;
        let mut fv = phi(&v);
        if !fv.is_finite() {
            v[i] = init[i] - step;
            fv = phi(&v);
        }
        simplex.push((v, fv));
    }

    let x_tol = settings.rel_tolerance.sqrt().min(1e-6);
    let mut iterations = 0;
    let mut converged = false;
    while iterations < settings.max_iterations * (n + 1) {
        iterations += 1;
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let best = simplex[0].1;
        let worst = simplex[n].1;
        let f_spread = (worst - best).abs();
        let x_spread = simplex[1..]
            .iter()
            .flat_map(|(v, _)| v.iter().zip(&simplex[0].0).map(|(a, b)| (a - b).abs() / b.abs().max(1.0)))
            .fold(0.0, f64::max);
        if f_spread <= settings.rel_tolerance * best.abs().max(1.0) && x_spread <= x_tol {
            converged = true;
            break;
        }

        let mut centroid = vec![0.0; n];
        for (v, _) in &simplex[..n] {
            for i in 0..n {
                centroid[i] += v[i] / n as f64;
            }
        }
        let along = |t: f64| -> Vec<f64> {
            (0..n).map(|i| centroid[i] + t * (simplex[n].0[i] - centroid[i])).collect()
        };
        let xr = along(-1.0);
        let fr = phi(&xr);
        if fr < simplex[0].1 {
            let xe = along(-2.0);
            let fe = phi(&xe);
            simplex[n] = if fe < fr { (xe, fe) } else { (xr, fr) };
        } else if fr < simplex[n - 1].1 {
            simplex[n] = (xr, fr);
        } else {
            let (xc, fc) = if fr < simplex[n].1 {
                let xc = along(-0.5);
                let fc = phi(&xc);
                (xc, fc)
            } else {
                let xc = along(0.5);
                let fc = phi(&xc);
                (xc, fc)
            };
            if fc < simplex[n].1.min(fr) {
                simplex[n] = (xc, fc);
            } else {
                let x0 = simplex[0].0.clone();
                for (v, fv) in simplex.iter_mut().skip(1) {
                    for i in 0..n {
                        v[i] = x0[i] + 0.5 * (v[i] - x0[i]);
                    }
                    *fv = phi(v);
                }
            }
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    let (argmax, value) = simplex.swap_remove(0);
    Ok(Maximum { argmax, value: -value, converged, iterations, algorithm: Algorithm::NelderMead })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_dimensional_quadratic() {
        let m = maximize(|x| -(x[0] - 1.0).powi(2), &[0.0], &[], &OptimizerSettings::default()).unwrap();
        assert!(m.converged);
        assert!((m.argmax[0] - 1.0).abs() < 1e-6);
        assert!(m.value.abs() < 1e-10);
    }

    #[test]
    fn two_dimensional_quadratic() {
        let f = |x: &[f64]| -(x[0] - 1.0).powi(2) - (x[1] + 2.0).powi(2);
        let m = maximize(f, &[0.0, 0.0], &[], &OptimizerSettings::default()).unwrap();
        assert!((m.argmax[0] - 1.0).abs() < 1e-6 && (m.argmax[1] + 2.0).abs() < 1e-6);
    }

    #[test]
    fn exponential_loglik_in_log_mean() {
        let f = |t: &[f64]| {
            let mu = t[0].exp();
            -21.0 * mu.ln() - 182.0 / mu
        };
        let m = maximize(f, &[0.0], &[], &OptimizerSettings::default()).unwrap();
        assert!((m.argmax[0].exp() - 182.0 / 21.0).abs() < 1e-4);
        assert!((m.value - (-66.3492)).abs() < 1e-4);
    }

    #[test]
    fn respects_bounds() {
        // unconstrained maximum at -1 lies outside (0, inf)
        let f = |x: &[f64]| -(x[0] + 1.0).powi(2);
        let m = maximize(f, &[2.0], &[Bound::POSITIVE], &OptimizerSettings::default()).unwrap();
        assert!(m.argmax[0] > 0.0);
        assert!(m.argmax[0] < 1e-3);
    }

    #[test]
    fn non_finite_start_is_an_error() {
        let r = maximize(|x| x[0].ln(), &[-1.0], &[], &OptimizerSettings::default());
        assert!(matches!(r, Err(NumericsError::NonFinite { .. })));
    }

    #[test]
    fn nelder_mead_handles_kinks() {
        let f = |x: &[f64]| -(x[0] - 0.3).abs() - 2.0 * (x[1] + 0.7).abs();
        let m = nelder_mead_maximize(f, &[0.0, 0.0], &OptimizerSettings::default()).unwrap();
        assert!(m.converged);
        assert!((m.argmax[0] - 0.3).abs() < 1e-5 && (m.argmax[1] + 0.7).abs() < 1e-5);
    }

    #[test]
    fn rosenbrock() {
        let f = |x: &[f64]| -(100.0 * (x[1] - x[0] * x[0]).powi(2) + (1.0 - x[0]).powi(2));
        let m = maximize(f, &[-1.2, 1.0], &[], &OptimizerSettings::default()).unwrap();
        assert!((m.argmax[0] - 1.0).abs() < 1e-3 && (m.argmax[1] - 1.0).abs() < 1e-3);
    }

    #[test]
    fn invalid_settings() {
        let s = OptimizerSettings { max_iterations: 0, ..Default::default() };
        assert!(maximize(|x| -x[0] * x[0], &[1.0], &[], &s).is_err());
    }
}
