//! Bracketed scalar root finding (Brent's method).

use crate::error::NumericsError;

/// An interval known to contain a sign change of the target function.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RootBracket {
    pub lo: f64,
    pub hi: f64,
    pub f_lo: f64,
    pub f_hi: f64,
}

impl RootBracket {
    pub fn new(lo: f64, hi: f64, f_lo: f64, f_hi: f64) -> Result<Self, NumericsError> {
        if !(lo < hi) {
            return Err(NumericsError::Domain(format!("bracket requires lo < hi, got [{lo}, {hi}]")));
        }
        if f_lo.is_nan() || f_hi.is_nan() || f_lo.signum() == f_hi.signum() && f_lo != 0.0 && f_hi != 0.0
        {
            return Err(NumericsError::NoSignChange { lo, hi, f_lo, f_hi });
        }
        Ok(Self { lo, hi, f_lo, f_hi })
    }

    /// Evaluates `f` at both ends and validates the sign change.
    pub fn from_fn<F: FnMut(f64) -> f64>(mut f: F, lo: f64, hi: f64) -> Result<Self, NumericsError> {
        let f_lo = f(lo);
        let f_hi = f(hi);
        Self::new(lo, hi, f_lo, f_hi)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RootSettings {
    /// Accept `x` when `|f(x)| <= f_tolerance · f_scale`.
    pub f_tolerance: f64,
    pub f_scale: f64,
    /// Accept when the bracket width is below `x_rel_tolerance · max(1, |x|)`.
    pub x_rel_tolerance: f64,
    pub max_iterations: usize,
}

impl Default for RootSettings {
    fn default() -> Self {
        Self { f_tolerance: 1e-9, f_scale: 1.0, x_rel_tolerance: 1e-10, max_iterations: 200 }
    }
}

/// Root of `f` inside `bracket` with default settings.
pub fn find_root<F: FnMut(f64) -> f64>(f: F, bracket: RootBracket) -> Result<f64, NumericsError> {
    find_root_with(f, bracket, &RootSettings::default())
}

/// Brent's method: inverse quadratic / secant steps guarded by bisection.
/// Iterates never leave the bracket.
pub fn find_root_with<F: FnMut(f64) -> f64>(
    mut f: F,
    bracket: RootBracket,
    settings: &RootSettings,
) -> Result<f64, NumericsError> {
    let f_tol = settings.f_tolerance * settings.f_scale;
    let (mut a, mut b) = (bracket.lo, bracket.hi);
    let (mut fa, mut fb) = (bracket.f_lo, bracket.f_hi);
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    let (mut c, mut fc) = (a, fa);
    let mut d = b - a;
    let mut e = d;

    for _ in 0..settings.max_iterations {
        if fb.signum() == fc.signum() {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
        if fc.abs() < fb.abs() {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let tol = 2.0 * f64::EPSILON * b.abs() + 0.5 * settings.x_rel_tolerance * b.abs().max(1.0);
        let m = 0.5 * (c - b);
        if fb.abs() <= f_tol || m.abs() <= tol || fb == 0.0 {
            return Ok(b);
        }
        if e.abs() >= tol && fa.abs() > fb.abs() {
            let s = fb / fa;
            let (mut p, mut q);
            if a == c {
                p = 2.0 * m * s;
                q = 1.0 - s;
            } else {
                let qa = fa / fc;
                let r = fb / fc;
                p = s * (2.0 * m * qa * (qa - r) - (b - a) * (r - 1.0));
                q = (qa - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if p > 0.0 {
                q = -q;
            } else {
                p = -p;
            }
            if 2.0 * p < (3.0 * m * q - (tol * q).abs()).min((e * q).abs()) {
                e = d;
                d = p / q;
            } else {
                d = m;
                e = m;
            }
        } else {
            d = m;
            e = m;
        }
        a = b;
        fa = fb;
        b += if d.abs() > tol { d } else { tol.copysign(m) };
        fb = f(b);
        if fb.is_nan() {
            return Err(NumericsError::NonFinite { at: vec![b] });
        }
    }
    Err(NumericsError::NotConverged { iterations: settings.max_iterations, best: vec![b], value: fb })
}
