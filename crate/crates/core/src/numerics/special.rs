//! Special functions: log-gamma, regularized incomplete gamma, normal and
//! chi-square distribution functions with their quantiles.

use std::f64::consts::{LN_2, PI, SQRT_2};

use crate::error::NumericsError;

const LANCZOS_G: f64 = 7.0;
#[allow(clippy::excessive_precision)] // published coefficients, kept verbatim
const LANCZOS_COEF: [f64; 9] = [
    0.999_999_999_999_809_93,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_13,
    -176.615_029_162_140_59,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_571_6e-6,
    1.505_632_735_149_311_6e-7,
];

const INCGAMMA_EPS: f64 = 1e-16;
const INCGAMMA_MAX_ITER: usize = 10_000;
const TINY: f64 = 1e-300;

/// `ln Γ(x)` for `x > 0`.
pub fn log_gamma(x: f64) -> Result<f64, NumericsError> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(NumericsError::Domain(format!("log_gamma requires x > 0, got {x}")));
    }
    Ok(ln_gamma(x))
}

/// Lanczos approximation without argument checks. Reflection below 0.5.
pub(crate) fn ln_gamma(x: f64) -> f64 {
    if x < 0.5 {
        // Γ(x)Γ(1−x) = π / sin(πx)
        return (PI / (PI * x).sin()).abs().ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut acc = LANCZOS_COEF[0];
    let t = x + LANCZOS_G + 0.5;
    for (i, c) in LANCZOS_COEF.iter().enumerate().skip(1) {
        acc += c / (x + i as f64);
    }
    0.5 * (2.0 * PI).ln() + (x + 0.5) * t.ln() - t + acc.ln()
}

fn check_incgamma(a: f64, x: f64) -> Result<(), NumericsError> {
    if !(a > 0.0) || !a.is_finite() || !(x >= 0.0) {
        return Err(NumericsError::Domain(format!(
            "incomplete gamma requires a > 0 and x >= 0, got a = {a}, x = {x}"
        )));
    }
    Ok(())
}

/// Series for `ln P(a, x)`, valid for `x < a + 1`.
fn ln_p_series(a: f64, x: f64) -> f64 {
    let mut term = 1.0 / a;
    let mut sum = term;
    let mut ap = a;
    for _ in 0..INCGAMMA_MAX_ITER {
        ap += 1.0;
        term *= x / ap;
        sum += term;
        if term.abs() < sum.abs() * INCGAMMA_EPS {
            break;
        }
    }
    sum.ln() - x + a * x.ln() - ln_gamma(a)
}

/// Modified Lentz continued fraction for `ln Q(a, x)`, valid for `x >= a + 1`.
fn ln_q_continued_fraction(a: f64, x: f64) -> f64 {
    let mut b = x + 1.0 - a;
    let mut c = 1.0 / TINY;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..INCGAMMA_MAX_ITER {
        let an = -(i as f64) * (i as f64 - a);
        b += 2.0;
        d = an * d + b;
        if d.abs() < TINY {
            d = TINY;
        }
        c = b + an / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < INCGAMMA_EPS {
            break;
        }
    }
    h.ln() - x + a * x.ln() - ln_gamma(a)
}

/// Regularized lower incomplete gamma function `P(a, x)`.
pub fn gamma_p(a: f64, x: f64) -> Result<f64, NumericsError> {
    check_incgamma(a, x)?;
    if x == 0.0 {
        return Ok(0.0);
    }
    if x.is_infinite() {
        return Ok(1.0);
    }
    Ok(if x < a + 1.0 {
        ln_p_series(a, x).exp()
    } else {
        -ln_q_continued_fraction(a, x).exp_m1()
    })
}

/// Regularized upper incomplete gamma function `Q(a, x) = 1 − P(a, x)`.
pub fn gamma_q(a: f64, x: f64) -> Result<f64, NumericsError> {
    Ok(ln_gamma_q(a, x)?.exp())
}

/// `ln Q(a, x)`, accurate far into the upper tail where `Q` underflows.
pub fn ln_gamma_q(a: f64, x: f64) -> Result<f64, NumericsError> {
    check_incgamma(a, x)?;
    if x == 0.0 {
        return Ok(0.0);
    }
    if x.is_infinite() {
        return Ok(f64::NEG_INFINITY);
    }
    Ok(if x < a + 1.0 {
        (-ln_p_series(a, x).exp()).ln_1p()
    } else {
        ln_q_continued_fraction(a, x)
    })
}

/// Complementary error function.
pub fn erfc(z: f64) -> f64 {
    if z.is_nan() {
        return f64::NAN;
    }
    if z >= 0.0 {
        ln_gamma_q(0.5, z * z).map(f64::exp).unwrap_or(0.0)
    } else {
        2.0 - erfc(-z)
    }
}

/// Standard normal density.
pub fn std_normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

/// Standard normal distribution function `Φ(x)`.
pub fn std_normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / SQRT_2)
}

/// `ln Φ(x)`, finite for arbitrarily negative `x`.
pub fn ln_std_normal_cdf(x: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    if x < 0.0 {
        // Φ(x) = Q(1/2, x²/2) / 2 for x < 0
        -LN_2 + ln_gamma_q(0.5, 0.5 * x * x).unwrap_or(f64::NEG_INFINITY)
    } else {
        (-0.5 * erfc(x / SQRT_2)).ln_1p()
    }
}

/// Inverse of `Φ`: rational approximation refined by Newton steps on [`std_normal_cdf`].
pub fn std_normal_quantile(p: f64) -> Result<f64, NumericsError> {
    if !(p > 0.0 && p < 1.0) {
        return Err(NumericsError::Domain(format!(
            "normal quantile requires 0 < p < 1, got {p}"
        )));
    }
    let mut x = acklam(p);
    for _ in 0..3 {
        // Newton on the tail that keeps the residual well-conditioned.
        let step = if x <= 0.0 {
            let e = std_normal_cdf(x) - p;
            e / std_normal_pdf(x)
        } else {
            let e = (1.0 - p) - std_normal_cdf(-x);
            e / std_normal_pdf(x)
        };
        if !step.is_finite() {
            break;
        }
        x -= step;
        if step.abs() <= 1e-15 * x.abs().max(1.0) {
            break;
        }
    }
    Ok(x)
}

fn acklam(p: f64) -> f64 {
    const A: [f64; 6] = [
        -3.969_683_028_665_376e1,
        2.209_460_984_245_205e2,
        -2.759_285_104_469_687e2,
        1.383_577_518_672_69e2,
        -3.066_479_806_614_716e1,
        2.506_628_277_459_239,
    ];
    const B: [f64; 5] = [
        -5.447_609_879_822_406e1,
        1.615_858_368_580_409e2,
        -1.556_989_798_598_866e2,
        6.680_131_188_771_972e1,
        -1.328_068_155_288_572e1,
    ];
    const C: [f64; 6] = [
        -7.784_894_002_430_293e-3,
        -3.223_964_580_411_365e-1,
        -2.400_758_277_161_838,
        -2.549_732_539_343_734,
        4.374_664_141_464_968,
        2.938_163_982_698_783,
    ];
    const D: [f64; 4] = [
        7.784_695_709_041_462e-3,
        3.224_671_290_700_398e-1,
        2.445_134_137_142_996,
        3.754_408_661_907_416,
    ];
    const P_LOW: f64 = 0.024_25;
    if p < P_LOW {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else if p <= 1.0 - P_LOW {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        let q = (-2.0 * (1.0 - p).ln()).sqrt();
        -(((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    }
}

/// Chi-square distribution function with `df` degrees of freedom.
pub fn chisq_cdf(x: f64, df: u32) -> Result<f64, NumericsError> {
    if df < 1 {
        return Err(NumericsError::Domain("chi-square requires df >= 1".into()));
    }
    if x <= 0.0 {
        return Ok(0.0);
    }
    gamma_p(0.5 * df as f64, 0.5 * x)
}

fn chisq_ln_pdf(x: f64, df: u32) -> f64 {
    let k = 0.5 * df as f64;
    (k - 1.0) * x.ln() - 0.5 * x - k * LN_2 - ln_gamma(k)
}

/// Quantile of the chi-square distribution: safeguarded Newton on the CDF,
/// falling back to bisection whenever a step leaves the current bracket.
pub fn chisq_quantile(p: f64, df: u32) -> Result<f64, NumericsError> {
    if !(0.0..1.0).contains(&p) {
        return Err(NumericsError::Domain(format!(
            "chi-square quantile requires 0 <= p < 1, got {p}"
        )));
    }
    if df < 1 {
        return Err(NumericsError::Domain("chi-square requires df >= 1".into()));
    }
    if p == 0.0 {
        return Ok(0.0);
    }
    let k = df as f64;
    // Wilson–Hilferty start
    let z = std_normal_quantile(p)?;
    let h = 2.0 / (9.0 * k);
    let mut x = (k * (1.0 - h + z * h.sqrt()).powi(3)).max(1e-8);

    let mut lo = 0.0_f64;
    let mut hi = x.max(1.0);
    while chisq_cdf(hi, df)? < p {
        lo = hi;
        hi *= 2.0;
    }
    for _ in 0..200 {
        let cdf = chisq_cdf(x, df)?;
        let err = cdf - p;
        if err.abs() <= 1e-15 {
            return Ok(x);
        }
        if err < 0.0 {
            lo = lo.max(x);
        } else {
            hi = hi.min(x);
        }
        let pdf = chisq_ln_pdf(x, df).exp();
        let newton = x - err / pdf;
        x = if pdf > 0.0 && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if hi - lo <= 1e-15 * hi {
            return Ok(x);
        }
    }
    Ok(x)
}
