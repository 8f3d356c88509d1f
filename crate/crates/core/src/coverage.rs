//! Monte-Carlo coverage of interval methods under a known model.
//!
//! Replicate `r` draws its sample from a ChaCha8 generator seeded with the
//! scenario seed and switched to stream `r`, so results do not depend on
//! how replicates are scheduled across worker threads.

use std::time::{Duration, Instant};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::catalog::{FamilySpec, SamplingModel};
use crate::error::{Error, Result};
use crate::estimation::fit_mle;
use crate::expr::{InterestFn, InterestFunction};
use crate::interval::{delta_interval, wald_interval, IntervalFlag, IntervalResult, Method};
use crate::model::Model;
use crate::profile::profile_interval;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageScenario {
    #[serde(flatten)]
    pub family: FamilySpec,
    pub true_params: Vec<f64>,
    pub n: usize,
    /// Expression or built-in name over the family's default parameter names.
    pub interest: String,
    pub level: f64,
    pub replicates: usize,
    pub seed: u64,
}

impl CoverageScenario {
    pub fn validate(&self) -> Result<()> {
        if self.replicates < 1 {
            return Err(Error::Spec("a coverage study needs at least one replicate".into()));
        }
        if !(self.level > 0.0 && self.level < 1.0) {
            return Err(Error::Spec(format!("level must lie in (0, 1), got {}", self.level)));
        }
        if self.n < 1 {
            return Err(Error::Spec("sample size must be at least 1".into()));
        }
        let model = self.model()?;
        model.space().check(&self.true_params)
    }

    pub fn model(&self) -> Result<SamplingModel> {
        SamplingModel::new(self.family.build(None)?, self.n)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodCoverage {
    pub method: Method,
    pub covered: usize,
    /// Replicates with an interval; the coverage denominator.
    pub evaluated: usize,
    pub coverage: f64,
    /// `√(p̂(1 − p̂)/evaluated)`.
    pub mc_se: f64,
    /// Mean width over intervals with two finite endpoints.
    pub mean_width: f64,
    /// Interval computation failed after a successful fit.
    pub failures: usize,
    /// Intervals with an open side (profile only).
    pub unbounded: usize,
    pub inner_not_converged: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageReport {
    pub scenario: CoverageScenario,
    pub true_interest: f64,
    pub methods: Vec<MethodCoverage>,
    /// Replicates whose fit failed or did not converge.
    pub fit_failures: usize,
    /// Wall-clock time; kept out of the serialized report so that reports
    /// are byte-identical across runs.
    #[serde(skip)]
    pub elapsed: Duration,
}

impl CoverageReport {
    pub fn method(&self, m: Method) -> Option<&MethodCoverage> {
        self.methods.iter().find(|c| c.method == m)
    }

    pub fn summary(&self) -> String {
        let parts: Vec<String> = self
            .methods
            .iter()
            .map(|m| format!("{} {:.4} (se {:.4}, width {:.3})", m.method.name(), m.coverage, m.mc_se, m.mean_width))
            .collect();
        format!(
            "coverage over {} replicates at level {}: {}; fit failures {}; {:.1}s",
            self.scenario.replicates,
            self.scenario.level,
            parts.join(", "),
            self.fit_failures,
            self.elapsed.as_secs_f64()
        )
    }
}

enum Outcome {
    FitFailed,
    Done(Vec<Result<IntervalResult>>),
}

fn replicate(
    scenario: &CoverageScenario,
    model: &SamplingModel,
    g: &InterestFunction,
    methods: &[Method],
    r: usize,
) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(scenario.seed);
    rng.set_stream(r as u64);
    let Ok(data) = model.simulate(&scenario.true_params, &mut rng) else {
        return Outcome::FitFailed;
    };
    let fit = match fit_mle(model, &data, Some(&scenario.true_params)) {
        Ok(f) if f.converged => f,
        _ => return Outcome::FitFailed,
    };
    let intervals = methods
        .iter()
        .map(|m| match m {
            Method::Profile => profile_interval(model, &data, &fit, g, scenario.level),
            Method::Delta => delta_interval(&fit, g, scenario.level),
            Method::Wald => wald_interval(&fit, g.coordinate().expect("checked in run_coverage"), scenario.level),
        })
        .collect();
    Outcome::Done(intervals)
}

/// Runs the study with `workers` threads (0 = rayon's default).
pub fn run_coverage(scenario: &CoverageScenario, methods: &[Method], workers: usize) -> Result<CoverageReport> {
    scenario.validate()?;
    if methods.is_empty() {
        return Err(Error::Spec("no interval methods requested".into()));
    }
    let start = Instant::now();
    let model = scenario.model()?;
    let g = InterestFunction::from_spec(&scenario.interest, model.space())?;
    let true_interest = g.value(&scenario.true_params)?;
    if methods.contains(&Method::Wald) && g.coordinate().is_none() {
        return Err(Error::Spec(format!(
            "Wald intervals apply to single parameters; '{}' is not one (use delta)",
            scenario.interest
        )));
    }

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Spec(format!("cannot start worker pool: {e}")))?;
    let outcomes: Vec<Outcome> = pool.install(|| {
        (0..scenario.replicates).into_par_iter().map(|r| replicate(scenario, &model, &g, methods, r)).collect()
    });

    let mut fit_failures = 0;
    let mut failed_replicates = 0;
    let mut stats: Vec<MethodCoverage> = methods
        .iter()
        .map(|&method| MethodCoverage {
            method,
            covered: 0,
            evaluated: 0,
            coverage: 0.0,
            mc_se: 0.0,
            mean_width: 0.0,
            failures: 0,
            unbounded: 0,
            inner_not_converged: 0,
        })
        .collect();
    let mut width_sums = vec![(0.0, 0usize); methods.len()];
    for outcome in &outcomes {
        let intervals = match outcome {
            Outcome::FitFailed => {
                fit_failures += 1;
                failed_replicates += 1;
                continue;
            }
            Outcome::Done(iv) => iv,
        };
        let mut any_failed = false;
        for (k, iv) in intervals.iter().enumerate() {
            let s = &mut stats[k];
            match iv {
                Ok(iv) => {
                    s.evaluated += 1;
                    if iv.contains(true_interest) {
                        s.covered += 1;
                    }
                    if iv.is_bounded() {
                        width_sums[k].0 += iv.width();
                        width_sums[k].1 += 1;
                    } else {
                        s.unbounded += 1;
                    }
                    if iv.has_flag(IntervalFlag::InnerNotConverged) {
                        s.inner_not_converged += 1;
                    }
                }
                Err(_) => {
                    s.failures += 1;
                    any_failed = true;
                }
            }
        }
        if any_failed {
            failed_replicates += 1;
        }
    }
    if failed_replicates * 5 > scenario.replicates {
        return Err(Error::Study { failed: failed_replicates, total: scenario.replicates });
    }
    for (s, (sum, count)) in stats.iter_mut().zip(width_sums) {
        if s.evaluated > 0 {
            let p = s.covered as f64 / s.evaluated as f64;
            s.coverage = p;
            s.mc_se = (p * (1.0 - p) / s.evaluated as f64).sqrt();
        }
        s.mean_width = if count > 0 { sum / count as f64 } else { f64::NAN };
    }
    Ok(CoverageReport {
        scenario: scenario.clone(),
        true_interest,
        methods: stats,
        fit_failures,
        elapsed: start.elapsed(),
    })
}
