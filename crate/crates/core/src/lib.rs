//! Likelihood-based inference for parametric models with right-censored
//! data: maximum likelihood fitting, Wald and delta-method intervals, and
//! profile likelihood-based confidence intervals for smooth scalar
//! interest functions.

// `!(x > 0.0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod catalog;
pub mod coverage;
pub mod error;
pub mod estimation;
pub mod expr;
pub mod interval;
pub mod io;
pub mod model;
pub mod numerics;
pub mod profile;
pub mod reproduce;
mod serde_real;

pub use catalog::{
    ExponentialModel, Family, FamilySpec, GammaModel, IndependenceModel, NormalKnownSigmaModel, SamplingModel,
};
pub use coverage::{run_coverage, CoverageReport, CoverageScenario, MethodCoverage};
pub use error::{Error, ErrorKind, NumericsError, Result};
pub use estimation::{fit_mle, FitResult};
pub use expr::{InterestFn, InterestFunction};
pub use interval::{delta_interval, wald_interval, IntervalFlag, IntervalResult, Method};
pub use io::{read_dataset, ModelSpecFile, ResultDocument, ResultRow};
pub use model::{Dataset, Model, Observation, ParameterSpace, Status};
pub use numerics::{Bound, OptimizerSettings};
pub use profile::{
    constrained_extremum_check, profile_curve, profile_interval, profile_loglik, ProfilePoint, ProfileSettings,
    ProfileTrace,
};
