//! Observations, datasets, parameter spaces and the likelihood calculus:
//! log-likelihood with right censoring, relative likelihood, score and
//! observed information.

use std::collections::HashSet;

use nalgebra::DMatrix;
use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{numeric_gradient, numeric_hessian, Bound, GRADIENT_STEP, HESSIAN_STEP};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Status {
    Exact,
    /// Only known to exceed the recorded value.
    RightCensored,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub value: f64,
    pub status: Status,
}

impl Observation {
    pub fn exact(value: f64) -> Self {
        Self { value, status: Status::Exact }
    }

    pub fn censored(value: f64) -> Self {
        Self { value, status: Status::RightCensored }
    }

    pub fn is_censored(&self) -> bool {
        self.status == Status::RightCensored
    }
}

/// Ordered, non-empty collection of observations with optional group labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    observations: Vec<Observation>,
    groups: Option<Vec<String>>,
}

impl Dataset {
    pub fn new(observations: Vec<Observation>) -> Result<Self> {
        Self::build(observations, None)
    }

    pub fn with_groups(observations: Vec<Observation>, groups: Vec<String>) -> Result<Self> {
        if groups.len() != observations.len() {
            return Err(Error::Data(format!(
                "{} group labels for {} observations",
                groups.len(),
                observations.len()
            )));
        }
        Self::build(observations, Some(groups))
    }

    fn build(observations: Vec<Observation>, groups: Option<Vec<String>>) -> Result<Self> {
        if observations.is_empty() {
            return Err(Error::Data("dataset is empty".into()));
        }
        if let Some(i) = observations.iter().position(|o| !o.value.is_finite()) {
            return Err(Error::Data(format!("observation {} is not finite", i + 1)));
        }
        Ok(Self { observations, groups })
    }

    /// All-exact dataset from raw values.
    pub fn exact(values: &[f64]) -> Result<Self> {
        Self::new(values.iter().map(|&v| Observation::exact(v)).collect())
    }

    pub fn observations(&self) -> &[Observation] {
        &self.observations
    }

    pub fn groups(&self) -> Option<&[String]> {
        self.groups.as_deref()
    }

    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }

    pub fn values(&self) -> Vec<f64> {
        self.observations.iter().map(|o| o.value).collect()
    }

    /// Sum of all recorded values, censored or not.
    pub fn total_time(&self) -> f64 {
        self.observations.iter().map(|o| o.value).sum()
    }

    pub fn event_count(&self) -> usize {
        self.observations.iter().filter(|o| !o.is_censored()).count()
    }

    /// Distinct group labels in order of first appearance.
    pub fn group_labels(&self) -> Vec<String> {
        let mut seen = HashSet::new();
        self.groups
            .iter()
            .flatten()
            .filter(|g| seen.insert(g.as_str()))
            .cloned()
            .collect()
    }

    /// Observations carrying `label`, without group annotations.
    pub fn group(&self, label: &str) -> Result<Dataset> {
        let groups = self
            .groups
            .as_ref()
            .ok_or_else(|| Error::Data(format!("dataset has no groups (requested '{label}')")))?;
        let obs: Vec<Observation> = self
            .observations
            .iter()
            .zip(groups)
            .filter(|(_, g)| g.as_str() == label)
            .map(|(o, _)| *o)
            .collect();
        if obs.is_empty() {
            return Err(Error::Data(format!("group '{label}' has no observations")));
        }
        Dataset::new(obs)
    }

    /// Concatenates datasets, labelling each part.
    pub fn concat_labelled(parts: &[(String, Dataset)]) -> Result<Dataset> {
        let mut obs = Vec::new();
        let mut groups = Vec::new();
        for (label, d) in parts {
            obs.extend_from_slice(&d.observations);
            groups.extend(std::iter::repeat_n(label.clone(), d.len()));
        }
        Dataset::with_groups(obs, groups)
    }
}

/// Named parameters with open-interval bounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterSpace {
    names: Vec<String>,
    bounds: Vec<Bound>,
}

impl ParameterSpace {
    pub fn new<S: Into<String>>(params: impl IntoIterator<Item = (S, Bound)>) -> Result<Self> {
        let (names, bounds): (Vec<String>, Vec<Bound>) =
            params.into_iter().map(|(n, b)| (n.into(), b)).unzip();
        if names.is_empty() {
            return Err(Error::Spec("parameter space must have at least one parameter".into()));
        }
        let mut seen = HashSet::new();
        for n in &names {
            if !seen.insert(n.as_str()) {
                return Err(Error::Spec(format!("duplicate parameter name '{n}'")));
            }
        }
        for (n, b) in names.iter().zip(&bounds) {
            Bound::new(b.lower, b.upper).map_err(|_| {
                Error::Spec(format!("parameter '{n}' has degenerate bounds ({}, {})", b.lower, b.upper))
            })?;
        }
        Ok(Self { names, bounds })
    }

    /// Concatenation of spaces whose names must be disjoint.
    pub fn product(spaces: &[&ParameterSpace]) -> Result<Self> {
        ParameterSpace::new(
            spaces.iter().flat_map(|s| s.names.iter().cloned().zip(s.bounds.iter().copied())),
        )
    }

    pub fn dim(&self) -> usize {
        self.names.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn bounds(&self) -> &[Bound] {
        &self.bounds
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn contains(&self, params: &[f64]) -> bool {
        params.len() == self.dim() && params.iter().zip(&self.bounds).all(|(&v, b)| b.contains(v))
    }

    pub fn check(&self, params: &[f64]) -> Result<()> {
        if params.len() != self.dim() {
            return Err(Error::ParameterDomain(format!(
                "expected {} parameters, got {}",
                self.dim(),
                params.len()
            )));
        }
        for ((n, b), &v) in self.names.iter().zip(&self.bounds).zip(params) {
            if !b.contains(v) {
                return Err(Error::ParameterDomain(format!(
                    "{n} = {v} outside ({}, {})",
                    b.lower, b.upper
                )));
            }
        }
        Ok(())
    }
}

/// A statistical model for a dataset: parameter space plus log-likelihood.
///
/// `raw_log_likelihood` may return non-finite values; [`log_likelihood`]
/// validates the parameter vector and maps those to `-inf`.
pub trait Model: Send + Sync {
    fn space(&self) -> &ParameterSpace;

    /// Sum of log-density terms of exact observations and log-survival
    /// terms of censored ones. Errors only on data/model mismatch.
    fn raw_log_likelihood(&self, data: &Dataset, params: &[f64]) -> Result<f64>;

    /// Rejects data the model cannot describe.
    fn check_data(&self, data: &Dataset) -> Result<()>;

    /// Cheap starting point inside the parameter space.
    fn initial_estimate(&self, data: &Dataset) -> Result<Vec<f64>>;

    /// Analytic score and observed information, when available.
    fn analytic_derivatives(&self, _data: &Dataset, _params: &[f64]) -> Option<(Vec<f64>, DMatrix<f64>)> {
        None
    }

    /// Draws a dataset from the model at `params`.
    fn simulate(&self, params: &[f64], rng: &mut dyn RngCore) -> Result<Dataset>;
}

/// Log-likelihood with the data-dependent constant fixed to 1.
/// Zero-likelihood points yield `-inf` rather than an error.
pub fn log_likelihood(model: &dyn Model, data: &Dataset, params: &[f64]) -> Result<f64> {
    model.space().check(params)?;
    let v = model.raw_log_likelihood(data, params)?;
    Ok(if v.is_nan() || v == f64::INFINITY { f64::NEG_INFINITY } else { v })
}

/// `l(ω) − l(ω̂)`.
pub fn relative_log_likelihood(
    model: &dyn Model,
    data: &Dataset,
    params: &[f64],
    mle: &[f64],
) -> Result<f64> {
    let l = log_likelihood(model, data, params)?;
    let l_hat = log_likelihood(model, data, mle)?;
    Ok(l - l_hat)
}

/// `L(ω)/L(ω̂)`.
pub fn relative_likelihood(model: &dyn Model, data: &Dataset, params: &[f64], mle: &[f64]) -> Result<f64> {
    relative_log_likelihood(model, data, params, mle).map(f64::exp)
}

fn loglik_closure<'a>(model: &'a dyn Model, data: &'a Dataset) -> impl Fn(&[f64]) -> f64 + 'a {
    move |w: &[f64]| {
        if model.space().contains(w) {
            model.raw_log_likelihood(data, w).unwrap_or(f64::NAN)
        } else {
            f64::NAN
        }
    }
}

/// Gradient of the log-likelihood.
pub fn score(model: &dyn Model, data: &Dataset, params: &[f64]) -> Result<Vec<f64>> {
    model.space().check(params)?;
    if let Some((s, _)) = model.analytic_derivatives(data, params) {
        return Ok(s);
    }
    Ok(numeric_gradient(loglik_closure(model, data), params, GRADIENT_STEP)?)
}

/// Negative Hessian of the log-likelihood, symmetric.
pub fn observed_information(model: &dyn Model, data: &Dataset, params: &[f64]) -> Result<DMatrix<f64>> {
    model.space().check(params)?;
    if let Some((_, info)) = model.analytic_derivatives(data, params) {
        return Ok(info);
    }
    numeric_observed_information(model, data, params)
}

/// Observed information from finite differences, ignoring analytic forms.
pub fn numeric_observed_information(model: &dyn Model, data: &Dataset, params: &[f64]) -> Result<DMatrix<f64>> {
    model.space().check(params)?;
    let h = numeric_hessian(loglik_closure(model, data), params, HESSIAN_STEP)?;
    Ok(-h)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dataset_invariants() {
        assert!(Dataset::new(vec![]).is_err());
        assert!(Dataset::exact(&[1.0, f64::NAN]).is_err());
        let d = Dataset::with_groups(
            vec![Observation::exact(1.0), Observation::censored(2.0), Observation::exact(3.0)],
            vec!["a".into(), "b".into(), "a".into()],
        )
        .unwrap();
        assert_eq!(d.group_labels(), vec!["a".to_string(), "b".to_string()]);
        assert_eq!(d.group("a").unwrap().values(), vec![1.0, 3.0]);
        assert_eq!(d.event_count(), 2);
        assert!(d.group("c").is_err());
    }

    #[test]
    fn parameter_space_checks() {
        assert!(ParameterSpace::new(Vec::<(String, Bound)>::new()).is_err());
        assert!(ParameterSpace::new([("a", Bound::REAL), ("a", Bound::REAL)]).is_err());
        let s = ParameterSpace::new([("mu", Bound::POSITIVE)]).unwrap();
        assert!(s.check(&[1.0]).is_ok());
        assert!(matches!(s.check(&[-1.0]), Err(Error::ParameterDomain(_))));
        assert!(s.check(&[1.0, 2.0]).is_err());
        let t = ParameterSpace::new([("nu", Bound::REAL)]).unwrap();
        assert_eq!(ParameterSpace::product(&[&s, &t]).unwrap().dim(), 2);
        assert!(ParameterSpace::product(&[&s, &s]).is_err());
    }
}
