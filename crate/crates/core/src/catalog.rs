//! Concrete distribution families and the model combinators built on them:
//! i.i.d. replication ([`SamplingModel`]) and independent products
//! ([`IndependenceModel`]).

use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;
use rand::RngCore;
use rand_distr::{Distribution, Exp, Gamma, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Dataset, Model, Observation, ParameterSpace};
use crate::numerics::special::{ln_gamma, ln_gamma_q, ln_std_normal_cdf};
use crate::numerics::Bound;

const HALF_LN_2PI: f64 = 0.918_938_533_204_672_8;

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::ParameterDomain(format!("{name} must be positive, got {v}")))
    }
}

/// `−ln μ − y/μ`.
pub fn exponential_logdensity(y: f64, mean: f64) -> Result<f64> {
    if !(y >= 0.0) {
        return Err(Error::ParameterDomain(format!("exponential value must be >= 0, got {y}")));
    }
    positive("mean", mean)?;
    Ok(-mean.ln() - y / mean)
}

/// `−y/μ`.
pub fn exponential_logsurvival(y: f64, mean: f64) -> Result<f64> {
    if !(y >= 0.0) {
        return Err(Error::ParameterDomain(format!("exponential value must be >= 0, got {y}")));
    }
    positive("mean", mean)?;
    Ok(-y / mean)
}

/// Gamma log-density in the (shape, mean) parameterization; rate is shape/mean.
pub fn gamma_logdensity(y: f64, shape: f64, mean: f64) -> Result<f64> {
    positive("gamma value", y)?;
    positive("shape", shape)?;
    positive("mean", mean)?;
    Ok(gamma_ld(y, shape, mean))
}

fn gamma_ld(y: f64, shape: f64, mean: f64) -> f64 {
    shape * (shape / mean).ln() + (shape - 1.0) * y.ln() - shape * y / mean - ln_gamma(shape)
}

/// `ln(1 − F(y))` via the regularized upper incomplete gamma function.
pub fn gamma_logsurvival(y: f64, shape: f64, mean: f64) -> Result<f64> {
    if !(y >= 0.0) {
        return Err(Error::ParameterDomain(format!("gamma value must be >= 0, got {y}")));
    }
    positive("shape", shape)?;
    positive("mean", mean)?;
    Ok(ln_gamma_q(shape, shape * y / mean)?)
}

pub fn normal_logdensity(y: f64, mean: f64, sigma: f64) -> Result<f64> {
    positive("sigma", sigma)?;
    Ok(normal_ld(y, mean, sigma))
}

fn normal_ld(y: f64, mean: f64, sigma: f64) -> f64 {
    let z = (y - mean) / sigma;
    -HALF_LN_2PI - sigma.ln() - 0.5 * z * z
}

/// A univariate distribution family: per-observation log-density and
/// log-survival over a named parameter vector, plus an exact sampler.
pub trait Family: Send + Sync + fmt::Debug {
    fn name(&self) -> &'static str;
    fn space(&self) -> &ParameterSpace;
    /// May be non-finite outside the support.
    fn log_density(&self, y: f64, params: &[f64]) -> f64;
    /// `ln(1 − F(y))`.
    fn log_survival(&self, y: f64, params: &[f64]) -> f64;
    fn check_value(&self, y: f64) -> Result<()>;
    fn sample(&self, params: &[f64], rng: &mut dyn RngCore) -> f64;

    fn sample_n(&self, params: &[f64], n: usize, rng: &mut dyn RngCore) -> Vec<f64> {
        (0..n).map(|_| self.sample(params, rng)).collect()
    }

    /// Moment-based starting point.
    fn moment_estimate(&self, data: &Dataset) -> Result<Vec<f64>>;

    /// Analytic score and observed information of an i.i.d. sample.
    fn sample_derivatives(&self, _data: &Dataset, _params: &[f64]) -> Option<(Vec<f64>, DMatrix<f64>)> {
        None
    }
}

fn single_space(names: Option<&[String]>, defaults: &[&str], bounds: &[Bound]) -> Result<ParameterSpace> {
    let names: Vec<String> = match names {
        Some(n) if n.len() == defaults.len() => n.to_vec(),
        Some(n) => {
            return Err(Error::Spec(format!(
                "expected {} parameter names, got {}",
                defaults.len(),
                n.len()
            )))
        }
        None => defaults.iter().map(|s| s.to_string()).collect(),
    };
    ParameterSpace::new(names.into_iter().zip(bounds.iter().copied()))
}

/// Exponential distribution with mean `μ`.
#[derive(Debug, Clone)]
pub struct ExponentialModel {
    space: ParameterSpace,
}

impl ExponentialModel {
    pub fn new() -> Self {
        Self::named("mu")
    }

    pub fn named(name: &str) -> Self {
        Self { space: single_space(Some(&[name.to_string()]), &["mu"], &[Bound::POSITIVE]).unwrap() }
    }
}

impl Default for ExponentialModel {
    fn default() -> Self {
        Self::new()
    }
}

impl Family for ExponentialModel {
    fn name(&self) -> &'static str {
        "exponential"
    }

    fn space(&self) -> &ParameterSpace {
        &self.space
    }

    fn log_density(&self, y: f64, p: &[f64]) -> f64 {
        -p[0].ln() - y / p[0]
    }

    fn log_survival(&self, y: f64, p: &[f64]) -> f64 {
        -y / p[0]
    }

    fn check_value(&self, y: f64) -> Result<()> {
        if y >= 0.0 {
            Ok(())
        } else {
            Err(Error::Data(format!("exponential data must be non-negative, got {y}")))
        }
    }

    fn sample(&self, p: &[f64], rng: &mut dyn RngCore) -> f64 {
        Exp::new(1.0 / p[0]).expect("positive mean").sample(rng)
    }

    fn moment_estimate(&self, data: &Dataset) -> Result<Vec<f64>> {
        let events = data.event_count();
        if events == 0 {
            return Err(Error::UnboundedLikelihood(
                "all exponential observations are censored; the likelihood increases without bound in the mean"
                    .into(),
            ));
        }
        let total = data.total_time();
        if total <= 0.0 {
            return Err(Error::UnboundedLikelihood("all exponential observations are zero".into()));
        }
        Ok(vec![total / events as f64])
    }

    fn sample_derivatives(&self, data: &Dataset, p: &[f64]) -> Option<(Vec<f64>, DMatrix<f64>)> {
        // l(μ) = −k ln μ − T/μ
        let mu = p[0];
        let k = data.event_count() as f64;
        let t = data.total_time();
        let score = -k / mu + t / (mu * mu);
        let info = -k / (mu * mu) + 2.0 * t / (mu * mu * mu);
        Some((vec![score], DMatrix::from_element(1, 1, info)))
    }
}

/// Gamma distribution with shape `λ` and mean `μ` (rate `λ/μ`).
#[derive(Debug, Clone)]
pub struct GammaModel {
    space: ParameterSpace,
}

impl GammaModel {
    pub fn new() -> Self {
        Self::named("shape", "mean")
    }

    pub fn named(shape: &str, mean: &str) -> Self {
        let names = [shape.to_string(), mean.to_string()];
        Self {
            space: single_space(Some(&names), &["shape", "mean"], &[Bound::POSITIVE, Bound::POSITIVE])
                .unwrap(),
        }
    }
}

impl Default for GammaModel {
    fn default() -> Self {
        Self::new()
    }
}

impl Family for GammaModel {
    fn name(&self) -> &'static str {
        "gamma"
    }

    fn space(&self) -> &ParameterSpace {
        &self.space
    }

    fn log_density(&self, y: f64, p: &[f64]) -> f64 {
        gamma_ld(y, p[0], p[1])
    }

    fn log_survival(&self, y: f64, p: &[f64]) -> f64 {
        ln_gamma_q(p[0], p[0] * y / p[1]).unwrap_or(f64::NAN)
    }

    fn check_value(&self, y: f64) -> Result<()> {
        if y > 0.0 {
            Ok(())
        } else {
            Err(Error::Data(format!("gamma data must be positive, got {y}")))
        }
    }

    fn sample(&self, p: &[f64], rng: &mut dyn RngCore) -> f64 {
        Gamma::new(p[0], p[1] / p[0]).expect("positive parameters").sample(rng)
    }

    fn sample_n(&self, p: &[f64], n: usize, rng: &mut dyn RngCore) -> Vec<f64> {
        let dist = Gamma::new(p[0], p[1] / p[0]).expect("positive parameters");
        (0..n).map(|_| dist.sample(rng)).collect()
    }

    fn moment_estimate(&self, data: &Dataset) -> Result<Vec<f64>> {
        let v = data.values();
        let n = v.len() as f64;
        let mean = v.iter().sum::<f64>() / n;
        let var = v.iter().map(|y| (y - mean).powi(2)).sum::<f64>() / n;
        if v.len() < 2 || var <= 1e-12 * mean * mean {
            return Err(Error::Data(
                "gamma fit needs at least two distinct values; the shape estimate diverges otherwise".into(),
            ));
        }
        Ok(vec![mean * mean / var, mean])
    }
}

/// Normal distribution with unknown mean and known standard deviation.
#[derive(Debug, Clone)]
pub struct NormalKnownSigmaModel {
    space: ParameterSpace,
    sigma: f64,
}

impl NormalKnownSigmaModel {
    pub fn new(sigma: f64) -> Result<Self> {
        Self::named("mu", sigma)
    }

    pub fn named(name: &str, sigma: f64) -> Result<Self> {
        positive("sigma", sigma)?;
        Ok(Self { space: single_space(Some(&[name.to_string()]), &["mu"], &[Bound::REAL])?, sigma })
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }
}

impl Family for NormalKnownSigmaModel {
    fn name(&self) -> &'static str {
        "normal_known_sigma"
    }

    fn space(&self) -> &ParameterSpace {
        &self.space
    }

    fn log_density(&self, y: f64, p: &[f64]) -> f64 {
        normal_ld(y, p[0], self.sigma)
    }

    fn log_survival(&self, y: f64, p: &[f64]) -> f64 {
        ln_std_normal_cdf(-(y - p[0]) / self.sigma)
    }

    fn check_value(&self, _y: f64) -> Result<()> {
        Ok(())
    }

    fn sample(&self, p: &[f64], rng: &mut dyn RngCore) -> f64 {
        Normal::new(p[0], self.sigma).expect("positive sigma").sample(rng)
    }

    fn moment_estimate(&self, data: &Dataset) -> Result<Vec<f64>> {
        Ok(vec![data.total_time() / data.len() as f64])
    }

    fn sample_derivatives(&self, data: &Dataset, p: &[f64]) -> Option<(Vec<f64>, DMatrix<f64>)> {
        if data.event_count() != data.len() {
            return None;
        }
        let s2 = self.sigma * self.sigma;
        let score = data.observations().iter().map(|o| (o.value - p[0]) / s2).sum();
        Some((vec![score], DMatrix::from_element(1, 1, data.len() as f64 / s2)))
    }
}

/// `n` independent replicates of a family.
#[derive(Debug, Clone)]
pub struct SamplingModel {
    family: Arc<dyn Family>,
    n: usize,
}

impl SamplingModel {
    pub fn new(family: Arc<dyn Family>, n: usize) -> Result<Self> {
        if n < 1 {
            return Err(Error::Spec("sampling model needs n >= 1".into()));
        }
        Ok(Self { family, n })
    }

    pub fn of<F: Family + 'static>(family: F, n: usize) -> Result<Self> {
        Self::new(Arc::new(family), n)
    }

    pub fn family(&self) -> &Arc<dyn Family> {
        &self.family
    }

    pub fn n(&self) -> usize {
        self.n
    }
}

impl Model for SamplingModel {
    fn space(&self) -> &ParameterSpace {
        self.family.space()
    }

    fn raw_log_likelihood(&self, data: &Dataset, params: &[f64]) -> Result<f64> {
        if data.len() != self.n {
            return Err(Error::Data(format!(
                "model expects {} observations, dataset has {}",
                self.n,
                data.len()
            )));
        }
        Ok(data
            .observations()
            .iter()
            .map(|o| match o.status {
                crate::model::Status::Exact => self.family.log_density(o.value, params),
                crate::model::Status::RightCensored => self.family.log_survival(o.value, params),
            })
            .sum())
    }

    fn check_data(&self, data: &Dataset) -> Result<()> {
        if data.len() != self.n {
            return Err(Error::Data(format!(
                "model expects {} observations, dataset has {}",
                self.n,
                data.len()
            )));
        }
        data.observations().iter().try_for_each(|o| self.family.check_value(o.value))
    }

    fn initial_estimate(&self, data: &Dataset) -> Result<Vec<f64>> {
        self.family.moment_estimate(data)
    }

    fn analytic_derivatives(&self, data: &Dataset, params: &[f64]) -> Option<(Vec<f64>, DMatrix<f64>)> {
        self.family.sample_derivatives(data, params)
    }

    fn simulate(&self, params: &[f64], rng: &mut dyn RngCore) -> Result<Dataset> {
        self.space().check(params)?;
        let values = self.family.sample_n(params, self.n, rng);
        Dataset::new(values.into_iter().map(Observation::exact).collect())
    }
}

/// Independent product of models, each bound to one group of the dataset.
pub struct IndependenceModel {
    components: Vec<(String, Box<dyn Model>)>,
    offsets: Vec<usize>,
    space: ParameterSpace,
}

impl fmt::Debug for IndependenceModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("IndependenceModel")
            .field("groups", &self.components.iter().map(|(g, _)| g).collect::<Vec<_>>())
            .field("space", &self.space)
            .finish()
    }
}

impl IndependenceModel {
    /// Parameter names across components must be disjoint.
    pub fn new(components: Vec<(String, Box<dyn Model>)>) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::Spec("independence model needs at least one component".into()));
        }
        let spaces: Vec<&ParameterSpace> = components.iter().map(|(_, m)| m.space()).collect();
        let space = ParameterSpace::product(&spaces)?;
        let mut offsets = Vec::with_capacity(components.len());
        let mut acc = 0;
        for (_, m) in &components {
            offsets.push(acc);
            acc += m.space().dim();
        }
        Ok(Self { components, offsets, space })
    }

    fn slices<'a>(&'a self, params: &'a [f64]) -> impl Iterator<Item = (&'a str, &'a dyn Model, &'a [f64])> {
        self.components.iter().zip(&self.offsets).map(move |((g, m), &o)| {
            (g.as_str(), m.as_ref(), &params[o..o + m.space().dim()])
        })
    }
}

impl Model for IndependenceModel {
    fn space(&self) -> &ParameterSpace {
        &self.space
    }

    fn raw_log_likelihood(&self, data: &Dataset, params: &[f64]) -> Result<f64> {
        let mut total = 0.0;
        for (g, m, p) in self.slices(params) {
            total += m.raw_log_likelihood(&data.group(g)?, p)?;
        }
        Ok(total)
    }

    fn check_data(&self, data: &Dataset) -> Result<()> {
        for (g, m) in &self.components {
            m.check_data(&data.group(g)?)?;
        }
        Ok(())
    }

    fn initial_estimate(&self, data: &Dataset) -> Result<Vec<f64>> {
        let mut init = Vec::with_capacity(self.space.dim());
        for (g, m) in &self.components {
            init.extend(m.initial_estimate(&data.group(g)?)?);
        }
        Ok(init)
    }

    fn analytic_derivatives(&self, data: &Dataset, params: &[f64]) -> Option<(Vec<f64>, DMatrix<f64>)> {
        let d = self.space.dim();
        let mut score = Vec::with_capacity(d);
        let mut info = DMatrix::zeros(d, d);
        for ((g, m, p), &o) in self.slices(params).zip(&self.offsets) {
            let (s, j) = m.analytic_derivatives(&data.group(g).ok()?, p)?;
            score.extend(s);
            info.view_mut((o, o), (j.nrows(), j.ncols())).copy_from(&j);
        }
        Some((score, info))
    }

    fn simulate(&self, params: &[f64], rng: &mut dyn RngCore) -> Result<Dataset> {
        self.space.check(params)?;
        let mut parts = Vec::with_capacity(self.components.len());
        for (g, m, p) in self.slices(params) {
            parts.push((g.to_string(), m.simulate(p, rng)?));
        }
        Dataset::concat_labelled(&parts)
    }
}

/// Serializable description of a family, as used in specification files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum FamilySpec {
    Exponential,
    Gamma,
    NormalKnownSigma { sigma: f64 },
}

impl FamilySpec {
    pub fn default_names(&self) -> Vec<String> {
        let names: &[&str] = match self {
            FamilySpec::Exponential => &["mu"],
            FamilySpec::Gamma => &["shape", "mean"],
            FamilySpec::NormalKnownSigma { .. } => &["mu"],
        };
        names.iter().map(|s| s.to_string()).collect()
    }

    /// Builds the family with the given parameter names (defaults when `None`).
    pub fn build(&self, names: Option<&[String]>) -> Result<Arc<dyn Family>> {
        let names = names.map(|n| n.to_vec()).unwrap_or_else(|| self.default_names());
        let expected = self.default_names().len();
        if names.len() != expected {
            return Err(Error::Spec(format!(
                "family '{}' takes {expected} parameter name(s), got {}",
                self.tag(),
                names.len()
            )));
        }
        Ok(match self {
            FamilySpec::Exponential => Arc::new(ExponentialModel::named(&names[0])),
            FamilySpec::Gamma => Arc::new(GammaModel::named(&names[0], &names[1])),
            FamilySpec::NormalKnownSigma { sigma } => Arc::new(NormalKnownSigmaModel::named(&names[0], *sigma)?),
        })
    }

    pub fn tag(&self) -> &'static str {
        match self {
            FamilySpec::Exponential => "exponential",
            FamilySpec::Gamma => "gamma",
            FamilySpec::NormalKnownSigma { .. } => "normal_known_sigma",
        }
    }
}
