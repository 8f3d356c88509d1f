//! Maximum likelihood fitting, plus the classical spread estimates and the
//! mean-versus-median comparison for the normal mean.

use std::f64::consts::{FRAC_2_PI, LN_2, PI};

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::model::{log_likelihood, observed_information, score, Dataset, Model};
use crate::numerics::special::ln_std_normal_cdf;
use crate::numerics::{maximize, Bound, OptimizerSettings, Reparameterization};

/// Result of a maximum likelihood fit, reported in the original coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub names: Vec<String>,
    pub bounds: Vec<Bound>,
    /// The maximizer `ω̂`.
    pub params: Vec<f64>,
    pub max_loglik: f64,
    /// `J(ω̂)`, the negative Hessian at the maximizer.
    pub observed_info: DMatrix<f64>,
    pub converged: bool,
    pub iterations: usize,
    pub init_used: Vec<f64>,
}

impl FitResult {
    pub fn param(&self, name: &str) -> Option<f64> {
        self.names.iter().position(|n| n == name).map(|i| self.params[i])
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitSettings {
    pub optimizer: OptimizerSettings,
    /// Positive-bounded parameters are optimized on the log scale (and
    /// doubly bounded ones on the logit scale) when set.
    pub transform: bool,
}

impl Default for FitSettings {
    fn default() -> Self {
        Self {
            optimizer: OptimizerSettings { rel_tolerance: 1e-12, ..OptimizerSettings::default() },
            transform: true,
        }
    }
}

pub fn fit_mle(model: &dyn Model, data: &Dataset, init: Option<&[f64]>) -> Result<FitResult> {
    fit_mle_with(model, data, init, &FitSettings::default())
}

pub fn fit_mle_with(
    model: &dyn Model,
    data: &Dataset,
    init: Option<&[f64]>,
    settings: &FitSettings,
) -> Result<FitResult> {
    model.check_data(data)?;
    let space = model.space();
    let init = match init {
        Some(w) => {
            space.check(w)?;
            w.to_vec()
        }
        None => {
            let w = model.initial_estimate(data)?;
            space.check(&w)?;
            w
        }
    };
    let reparam = if settings.transform {
        Reparameterization::new(space.bounds())
    } else {
        Reparameterization::identity(space.dim())
    };
    let theta0 = reparam.to_free(&init);
    let objective = |t: &[f64]| {
        let w = reparam.from_free(t);
        if !space.contains(&w) {
            return f64::NEG_INFINITY;
        }
        match model.raw_log_likelihood(data, &w) {
            Ok(v) if v.is_finite() => v,
            _ => f64::NEG_INFINITY,
        }
    };
    let bounds = if settings.transform { vec![] } else { space.bounds().to_vec() };
    let best = maximize(objective, &theta0, &bounds, &settings.optimizer)?;
    let params = reparam.from_free(&best.argmax);
    if !space.contains(&params) || best.argmax.iter().any(|t| t.abs() > 600.0) {
        return Err(Error::UnboundedLikelihood(format!(
            "maximization drifted to the edge of the parameter space ({params:?})"
        )));
    }
    let max_loglik = log_likelihood(model, data, &params)?;
    let observed_info = observed_information(model, data, &params)?;
    let s = score(model, data, &params)?;
    let score_norm = s.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let converged = best.converged && score_norm <= 1e-5 * max_loglik.abs().max(1.0);
    Ok(FitResult {
        names: space.names().to_vec(),
        bounds: space.bounds().to_vec(),
        params,
        max_loglik,
        observed_info,
        converged,
        iterations: best.iterations,
        init_used: init,
    })
}

/// A spread estimate with a flag for all-equal samples.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpreadEstimate {
    pub value: f64,
    pub degenerate: bool,
}

fn spread(sample: &[f64], term: impl Fn(f64) -> f64, finish: impl Fn(f64) -> f64) -> Result<SpreadEstimate> {
    if sample.len() < 2 {
        return Err(Error::Data("spread estimates need at least two values".into()));
    }
    let n = sample.len() as f64;
    let mean = sample.iter().sum::<f64>() / n;
    let acc = sample.iter().map(|y| term(y - mean)).sum::<f64>() / n;
    let value = finish(acc);
    Ok(SpreadEstimate { value, degenerate: value == 0.0 })
}

/// `√(π/2) · Σ|yᵢ − ȳ| / n`.
pub fn mean_error_estimate(sample: &[f64]) -> Result<SpreadEstimate> {
    spread(sample, f64::abs, |a| (PI / 2.0).sqrt() * a)
}

/// `√(Σ(yᵢ − ȳ)² / n)`.
pub fn mean_square_error_estimate(sample: &[f64]) -> Result<SpreadEstimate> {
    spread(sample, |d| d * d, f64::sqrt)
}

fn check_statistic_args(n: usize, sigma: f64) -> Result<()> {
    if !(sigma > 0.0) {
        return Err(Error::ParameterDomain(format!("sigma must be positive, got {sigma}")));
    }
    if n < 3 || n.is_multiple_of(2) {
        return Err(Error::ParameterDomain(format!("sample size must be odd and at least 3, got {n}")));
    }
    Ok(())
}

/// Log-likelihood of `μ` from the sampling distribution of the sample mean,
/// `−n(ȳ − μ)²/(2σ²)`.
pub fn statistic_loglik_mean(mu: f64, mean: f64, n: usize, sigma: f64) -> Result<f64> {
    check_statistic_args(n, sigma)?;
    let z = (mean - mu) / sigma;
    Ok(-(n as f64) * z * z / 2.0)
}

/// Log-likelihood of `μ` from the sampling distribution of the sample
/// median of `n` normal observations, normalized to 0 at `μ = median`.
pub fn statistic_loglik_median(mu: f64, median: f64, n: usize, sigma: f64) -> Result<f64> {
    check_statistic_args(n, sigma)?;
    let z = (median - mu) / sigma;
    let half = (n as f64 - 1.0) / 2.0;
    Ok(-z * z / 2.0 + half * (ln_std_normal_cdf(z) + ln_std_normal_cdf(-z)) + (n as f64 - 1.0) * LN_2)
}

/// Large-sample efficiency of the median relative to the mean, `2/π`.
pub fn median_asymptotic_efficiency() -> f64 {
    FRAC_2_PI
}

/// Curvature of the median-based log-likelihood at its maximum divided by
/// that of the mean-based one: `(1 + (n − 1)·2/π) / n`.
pub fn median_curvature_ratio(n: usize) -> Result<f64> {
    check_statistic_args(n, 1.0)?;
    let n = n as f64;
    Ok((1.0 + (n - 1.0) * FRAC_2_PI) / n)
}
