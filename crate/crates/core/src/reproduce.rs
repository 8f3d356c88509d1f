//! Bundled leukemia remission data and the reference results computed from
//! it: the two-exponential table of estimates and 0.95 profile intervals,
//! and the gamma standard-deviation example for the control arm.

use serde::{Deserialize, Serialize};

use crate::catalog::{ExponentialModel, GammaModel, IndependenceModel, SamplingModel};
use crate::error::Result;
use crate::estimation::{fit_mle, FitResult};
use crate::expr::{InterestFn, InterestFunction};
use crate::interval::{delta_interval, IntervalResult};
use crate::io::{parse_dataset, ResultDocument, ResultRow};
use crate::model::{Dataset, Model};
use crate::profile::profile_interval;

pub const LEUKEMIA_CSV: &str = include_str!("../data/leukemia.csv");
pub const CONTROL_TXT: &str = include_str!("../data/control.txt");
pub const DRUG_TXT: &str = include_str!("../data/drug.txt");

/// Absolute tolerance for three-decimal reference values.
pub const TOLERANCE: f64 = 0.005;

pub fn leukemia() -> Dataset {
    parse_dataset(LEUKEMIA_CSV, Some("group")).expect("bundled data parses")
}

pub fn control() -> Dataset {
    parse_dataset(CONTROL_TXT, None).expect("bundled data parses")
}

pub fn drug() -> Dataset {
    parse_dataset(DRUG_TXT, None).expect("bundled data parses")
}

/// Drug arm mean `m1`, control arm mean `m2`.
pub fn two_exponential_model() -> IndependenceModel {
    IndependenceModel::new(vec![
        ("drug".into(), Box::new(SamplingModel::of(ExponentialModel::named("m1"), 21).unwrap()) as Box<dyn Model>),
        ("control".into(), Box::new(SamplingModel::of(ExponentialModel::named("m2"), 21).unwrap())),
    ])
    .expect("disjoint parameter names")
}

pub fn control_gamma_model() -> SamplingModel {
    SamplingModel::of(GammaModel::new(), 21).unwrap()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Reference {
    pub name: &'static str,
    pub expr: &'static str,
    pub estimate: f64,
    pub lower: f64,
    pub upper: f64,
}

pub const TABLE: [Reference; 6] = [
    Reference { name: "mu1", expr: "m1", estimate: 39.889, lower: 22.127, upper: 83.013 },
    Reference { name: "mu2", expr: "m2", estimate: 8.667, lower: 5.814, upper: 13.735 },
    Reference { name: "psi1", expr: "m1 - m2", estimate: 31.222, lower: 12.784, upper: 74.444 },
    Reference { name: "psi2", expr: "m1 / m2", estimate: 4.603, lower: 2.174, upper: 10.583 },
    Reference { name: "psi3", expr: "m1 / (m1 + m2)", estimate: 0.822, lower: 0.685, upper: 0.914 },
    Reference { name: "psi4", expr: "2 - m2/m1 - m1/m2", estimate: -2.820, lower: -8.677, upper: -0.634 },
];

/// Gamma fit to the control arm and the standard deviation `mean/√shape`.
pub struct GammaReference {
    pub shape: f64,
    pub mean: f64,
    pub sd: f64,
    pub profile: (f64, f64),
    pub delta: (f64, f64),
}

pub const GAMMA_SD: GammaReference =
    GammaReference { shape: 1.642, mean: 8.667, sd: 6.763, profile: (4.634, 11.297), delta: (3.829, 9.697) };

/// A computed value next to its reference.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub computed: f64,
    pub expected: f64,
    pub pass: bool,
}

impl Check {
    fn new(name: String, computed: f64, expected: f64) -> Self {
        Self { pass: (computed - expected).abs() <= TOLERANCE, name, computed, expected }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Reproduction {
    pub document: ResultDocument,
    pub checks: Vec<Check>,
}

impl Reproduction {
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }
}

pub struct TableRow {
    pub reference: Reference,
    pub interval: IntervalResult,
}

/// Fits the two-exponential model and computes the six profile intervals.
pub fn table_rows() -> Result<(FitResult, Vec<TableRow>)> {
    let model = two_exponential_model();
    let data = leukemia();
    let fit = fit_mle(&model, &data, None)?;
    let rows = TABLE
        .iter()
        .map(|r| {
            let g = InterestFunction::parse(r.expr, model.space())?;
            Ok(TableRow { reference: *r, interval: profile_interval(&model, &data, &fit, &g, 0.95)? })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((fit, rows))
}

pub struct GammaSdResult {
    pub fit: FitResult,
    pub profile: IntervalResult,
    pub delta: IntervalResult,
}

pub fn gamma_sd() -> Result<GammaSdResult> {
    let model = control_gamma_model();
    let data = control();
    let fit = fit_mle(&model, &data, None)?;
    let g = InterestFunction::builtin("gamma_sd", model.space())?;
    let profile = profile_interval(&model, &data, &fit, &g, 0.95)?;
    let delta = delta_interval(&fit, &g, 0.95)?;
    debug_assert!((g.value(&fit.params)? - profile.estimate).abs() < 1e-12);
    Ok(GammaSdResult { fit, profile, delta })
}

/// Runs both reference computations and compares every number.
pub fn reproduce() -> Result<Reproduction> {
    let mut rows = Vec::new();
    let mut checks = Vec::new();
    let (_, table) = table_rows()?;
    for t in &table {
        let r = t.reference;
        rows.push(ResultRow::from_interval(r.name, &t.interval));
        checks.push(Check::new(format!("{} estimate", r.name), t.interval.estimate, r.estimate));
        checks.push(Check::new(format!("{} lower", r.name), t.interval.lower, r.lower));
        checks.push(Check::new(format!("{} upper", r.name), t.interval.upper, r.upper));
    }
    let gs = gamma_sd()?;
    rows.push(ResultRow::from_interval("gamma_sd", &gs.profile));
    rows.push(ResultRow::from_interval("gamma_sd", &gs.delta));
    let e = &GAMMA_SD;
    checks.push(Check::new("gamma shape".into(), gs.fit.params[0], e.shape));
    checks.push(Check::new("gamma mean".into(), gs.fit.params[1], e.mean));
    checks.push(Check::new("gamma_sd estimate".into(), gs.profile.estimate, e.sd));
    checks.push(Check::new("gamma_sd profile lower".into(), gs.profile.lower, e.profile.0));
    checks.push(Check::new("gamma_sd profile upper".into(), gs.profile.upper, e.profile.1));
    checks.push(Check::new("gamma_sd delta lower".into(), gs.delta.lower, e.delta.0));
    checks.push(Check::new("gamma_sd delta upper".into(), gs.delta.upper, e.delta.1));
    Ok(Reproduction { document: ResultDocument::new(rows), checks })
}
