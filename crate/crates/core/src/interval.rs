//! Wald intervals for single parameters and delta-method intervals for
//! interest functions, both built from the inverse observed information.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimation::FitResult;
use crate::expr::InterestFn;
use crate::numerics::linalg::{invert_spd, quadratic_form};
use crate::numerics::special::std_normal_quantile;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Wald,
    Delta,
    Profile,
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::Wald => "wald",
            Method::Delta => "delta",
            Method::Profile => "profile",
        }
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "wald" => Ok(Method::Wald),
            "delta" => Ok(Method::Delta),
            "profile" => Ok(Method::Profile),
            other => Err(Error::Spec(format!("unknown method '{other}' (expected wald, delta or profile)"))),
        }
    }
}

/// Diagnostics attached to an interval. None of them invalidate the
/// numbers; they say how far to trust them.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IntervalFlag {
    /// Endpoint lies outside the parameter's natural range.
    LowerOutOfRange,
    UpperOutOfRange,
    /// Gradient of the interest function vanished at the estimate.
    ZeroGradient,
    /// No crossing of the cutoff was found on that side.
    LowerUnbounded,
    UpperUnbounded,
    /// The profile rises above the cutoff again beyond a crossing; the
    /// outermost crossing is reported.
    MultipleRoots,
    /// The profile increased somewhere on the path away from the estimate.
    NonMonotone,
    InnerNotConverged,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntervalResult {
    pub estimate: f64,
    #[serde(with = "crate::serde_real")]
    pub lower: f64,
    #[serde(with = "crate::serde_real")]
    pub upper: f64,
    pub level: f64,
    pub method: Method,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub standard_error: Option<f64>,
    /// Condition number of the observed information that was inverted.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub condition: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub flags: Vec<IntervalFlag>,
}

impl IntervalResult {
    pub fn contains(&self, x: f64) -> bool {
        self.lower <= x && x <= self.upper
    }

    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }

    pub fn is_bounded(&self) -> bool {
        self.lower.is_finite() && self.upper.is_finite()
    }

    pub fn has_flag(&self, flag: IntervalFlag) -> bool {
        self.flags.contains(&flag)
    }
}

pub(crate) fn check_level(level: f64) -> Result<()> {
    if level > 0.0 && level < 1.0 {
        Ok(())
    } else {
        Err(Error::ParameterDomain(format!("confidence level must lie in (0, 1), got {level}")))
    }
}

/// Two-sided normal critical value `z*` for `level`.
pub fn normal_critical(level: f64) -> Result<f64> {
    check_level(level)?;
    Ok(std_normal_quantile(0.5 + level / 2.0)?)
}

/// `ω̂ᵢ ∓ z*·√[(J⁻¹)ᵢᵢ]`.
pub fn wald_interval(fit: &FitResult, component: usize, level: f64) -> Result<IntervalResult> {
    let d = fit.params.len();
    if component >= d {
        return Err(Error::ParameterDomain(format!("component {component} out of range for {d} parameters")));
    }
    let z = normal_critical(level)?;
    let inv = invert_spd(&fit.observed_info)?;
    let se = inv.inverse[(component, component)].sqrt();
    let estimate = fit.params[component];
    let (lower, upper) = (estimate - z * se, estimate + z * se);
    let mut flags = Vec::new();
    if let Some(b) = fit.bounds.get(component) {
        if lower <= b.lower {
            flags.push(IntervalFlag::LowerOutOfRange);
        }
        if upper >= b.upper {
            flags.push(IntervalFlag::UpperOutOfRange);
        }
    }
    Ok(IntervalResult {
        estimate,
        lower,
        upper,
        level,
        method: Method::Wald,
        standard_error: Some(se),
        condition: Some(inv.condition),
        flags,
    })
}

/// Delta-method standard error `√(∇gᵀ J⁻¹ ∇g)` at the estimate.
pub fn delta_standard_error(fit: &FitResult, g: &dyn InterestFn) -> Result<(f64, f64)> {
    let inv = invert_spd(&fit.observed_info)?;
    let grad = g.gradient(&fit.params)?;
    Ok((quadratic_form(&inv.inverse, &grad).max(0.0).sqrt(), inv.condition))
}

/// `ψ̂ ∓ z*·√(∇gᵀ J⁻¹ ∇g)`; always symmetric about `ψ̂ = g(ω̂)`.
pub fn delta_interval(fit: &FitResult, g: &dyn InterestFn, level: f64) -> Result<IntervalResult> {
    let z = normal_critical(level)?;
    let estimate = g.value(&fit.params)?;
    let (se, condition) = delta_standard_error(fit, g)?;
    let mut flags = Vec::new();
    if se == 0.0 {
        flags.push(IntervalFlag::ZeroGradient);
    }
    Ok(IntervalResult {
        estimate,
        lower: estimate - z * se,
        upper: estimate + z * se,
        level,
        method: Method::Delta,
        standard_error: Some(se),
        condition: Some(condition),
        flags,
    })
}
