//! Profile likelihood of a scalar interest function, likelihood-based
//! confidence intervals from it, and an independent constrained-extremum
//! computation of the same endpoints.
//!
//! The inner maximization over `{ω : g(ω) = ψ}` eliminates one coordinate
//! (the pivot) by solving the constraint for it, then maximizes the
//! likelihood over the remaining coordinates on the transformed scale.
//! A quadratic-penalty sequence is used only to find a feasible starting
//! point when the warm start cannot be projected onto the constraint.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimation::{fit_mle, FitResult};
use crate::expr::InterestFn;
use crate::interval::{check_level, delta_standard_error, IntervalFlag, IntervalResult, Method};
use crate::model::{Dataset, Model, ParameterSpace};
use crate::numerics::special::chisq_quantile;
use crate::numerics::{
    find_root_with, maximize, numeric_gradient, OptimizerSettings, Reparameterization, RootBracket, RootSettings,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProfileSettings {
    /// Bracketing step as a multiple of the delta-method standard error.
    pub step_factor: f64,
    pub max_expansions: usize,
    /// Extra steps taken past a crossing to detect a profile that rises again.
    pub lookahead: usize,
    pub inner: OptimizerSettings,
    /// Penalty weights used to find a feasible start when projection fails.
    pub penalty_schedule: [f64; 3],
    /// Brent settings for the endpoint search (tolerance on the log-likelihood scale).
    #[serde(skip, default = "endpoint_root_settings")]
    pub root: RootSettings,
}

fn endpoint_root_settings() -> RootSettings {
    RootSettings { f_tolerance: 1e-10, f_scale: 1.0, x_rel_tolerance: 1e-12, max_iterations: 200 }
}

impl Default for ProfileSettings {
    fn default() -> Self {
        Self {
            step_factor: 1.2,
            max_expansions: 50,
            lookahead: 2,
            inner: OptimizerSettings { rel_tolerance: 1e-12, ..OptimizerSettings::default() },
            penalty_schedule: [10.0, 1e3, 1e5],
            root: endpoint_root_settings(),
        }
    }
}

/// One evaluation of the profile log-likelihood.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfilePoint {
    pub psi: f64,
    #[serde(with = "crate::serde_real")]
    pub profile_loglik: f64,
    /// Constrained maximizer `ω̃_ψ`; empty when `ψ` was infeasible.
    pub params: Vec<f64>,
    pub inner_converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileTrace {
    /// Sorted by `psi`.
    pub points: Vec<ProfilePoint>,
    pub psi_hat: f64,
    pub max_loglik: f64,
}

fn fmt_real(v: f64) -> String {
    if v.is_finite() {
        format!("{v}")
    } else if v.is_nan() {
        "nan".into()
    } else if v > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

impl ProfileTrace {
    /// `r_g(ψ) = l_g(ψ) − l(ω̂)` for each point.
    pub fn relative(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.profile_loglik - self.max_loglik).collect()
    }

    /// CSV with header `psi,profile_loglik,relative_loglik,converged`.
    pub fn write_csv<W: Write>(&self, out: W) -> std::io::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["psi", "profile_loglik", "relative_loglik", "converged"])?;
        for p in &self.points {
            w.write_record([
                fmt_real(p.psi),
                fmt_real(p.profile_loglik),
                fmt_real(p.profile_loglik - self.max_loglik),
                (p.inner_converged as u8).to_string(),
            ])?;
        }
        w.flush()
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("csv output is utf-8")
    }
}

struct Profiler<'a> {
    model: &'a dyn Model,
    data: &'a Dataset,
    g: &'a dyn InterestFn,
    space: &'a ParameterSpace,
    reparam: Reparameterization,
    settings: &'a ProfileSettings,
}

impl<'a> Profiler<'a> {
    fn new(model: &'a dyn Model, data: &'a Dataset, g: &'a dyn InterestFn, settings: &'a ProfileSettings) -> Self {
        let space = model.space();
        Self { model, data, g, space, reparam: Reparameterization::new(space.bounds()), settings }
    }

    fn loglik(&self, w: &[f64]) -> Option<f64> {
        if !self.space.contains(w) {
            return None;
        }
        self.model.raw_log_likelihood(self.data, w).ok().filter(|v| v.is_finite())
    }

    fn residual(&self, w: &mut [f64], p: usize, x: f64, psi: f64) -> Option<f64> {
        w[p] = x;
        self.g.value(w).ok().map(|v| v - psi).filter(|r| r.is_finite())
    }

    /// Candidate pivots, most sensitive first on the transformed scale.
    fn pivots(&self, w: &[f64]) -> Vec<usize> {
        if let Some(i) = self.g.coordinate() {
            return vec![i];
        }
        let d = w.len();
        let maps = self.reparam.maps();
        let mut order: Vec<(usize, f64)> = match self.g.gradient(w) {
            Ok(grad) => (0..d).map(|j| (j, (grad[j] * maps[j].jacobian(maps[j].to_free(w[j]))).abs())).collect(),
            Err(_) => (0..d).map(|j| (j, 0.0)).collect(),
        };
        order.sort_by(|a, b| b.1.total_cmp(&a.1));
        order.into_iter().map(|(j, _)| j).collect()
    }

    /// Solves `g(ω) = ψ` for `ω_p` with the other coordinates of `w` held
    /// fixed, starting from the current `w[p]`.
    fn solve_pivot(&self, w: &mut [f64], p: usize, psi: f64) -> bool {
        let bound = self.space.bounds()[p];
        if self.g.coordinate() == Some(p) {
            w[p] = psi;
            return bound.contains(psi);
        }
        let tight = 1e-13 * psi.abs().max(1.0);
        let loose = 1e-10 * psi.abs().max(1.0);
        let x0 = w[p];
        let r0 = self.residual(w, p, x0, psi);

        // damped Newton
        if let Some(mut r) = r0 {
            let mut x = x0;
            for _ in 0..50 {
                if r.abs() <= tight {
                    break;
                }
                w[p] = x;
                let slope = match self.g.gradient(w) {
                    Ok(grad) if grad[p].is_finite() && grad[p] != 0.0 => grad[p],
                    _ => break,
                };
                let mut step = r / slope;
                let mut accepted = false;
                for _ in 0..60 {
                    let nx = x - step;
                    if bound.contains(nx) {
                        if let Some(nr) = self.residual(w, p, nx, psi) {
                            if nr.abs() < r.abs() {
                                x = nx;
                                r = nr;
                                accepted = true;
                                break;
                            }
                        }
                    }
                    step *= 0.5;
                }
                if !accepted {
                    break;
                }
            }
            if r.abs() <= loose {
                w[p] = x;
                return true;
            }
        }

        // bracket outward on the transformed scale, nearest crossing first
        let map = self.reparam.maps()[p];
        let u0 = map.to_free(x0);
        let mut prev = [(u0, r0), (u0, r0)];
        let mut open = [true, true];
        let mut found = None;
        'scan: for k in 0..48 {
            for (side, dir) in [1.0, -1.0].into_iter().enumerate() {
                if !open[side] {
                    continue;
                }
                let u = u0 + dir * 0.05 * 2f64.powi(k);
                let x = map.from_free(u);
                if !x.is_finite() || !bound.contains(x) {
                    open[side] = false;
                    continue;
                }
                let r = self.residual(w, p, x, psi);
                if let (Some(a), Some(b)) = (prev[side].1, r) {
                    if a == 0.0 || a.signum() != b.signum() {
                        found = Some((prev[side].0, a, u, b));
                        break 'scan;
                    }
                }
                prev[side] = (u, r);
            }
        }
        let Some((ua, ra, ub, rb)) = found else {
            w[p] = x0;
            return false;
        };
        let (lo, hi, flo, fhi) = if ua < ub { (ua, ub, ra, rb) } else { (ub, ua, rb, ra) };
        let Ok(bracket) = RootBracket::new(lo, hi, flo, fhi) else {
            w[p] = x0;
            return false;
        };
        let settings = RootSettings { f_tolerance: tight, f_scale: 1.0, x_rel_tolerance: 1e-15, max_iterations: 300 };
        let mut tmp = w.to_vec();
        let root = find_root_with(
            |u| self.residual(&mut tmp, p, map.from_free(u), psi).unwrap_or(f64::NAN),
            bracket,
            &settings,
        );
        match root {
            Ok(u) => {
                let x = map.from_free(u);
                match self.residual(w, p, x, psi) {
                    Some(r) if r.abs() <= loose && bound.contains(x) => true,
                    _ => {
                        w[p] = x0;
                        false
                    }
                }
            }
            Err(_) => {
                w[p] = x0;
                false
            }
        }
    }

    /// Maximizes over the non-pivot coordinates. `None` when `base` cannot
    /// be projected onto the constraint through this pivot.
    fn reduced(&self, psi: f64, pivot: usize, base: &[f64]) -> Option<ProfilePoint> {
        let maps = self.reparam.maps();
        let bounds = self.space.bounds();
        let free: Vec<usize> = (0..base.len()).filter(|&i| i != pivot).collect();
        let eval = |v: &[f64]| -> Option<(Vec<f64>, f64)> {
            let mut w = base.to_vec();
            for (k, &i) in free.iter().enumerate() {
                w[i] = maps[i].from_free(v[k]);
                if !bounds[i].contains(w[i]) {
                    return None;
                }
            }
            if !self.solve_pivot(&mut w, pivot, psi) {
                return None;
            }
            let l = self.loglik(&w)?;
            Some((w, l))
        };
        let v0: Vec<f64> = free.iter().map(|&i| maps[i].to_free(base[i])).collect();
        eval(&v0)?;
        let best =
            maximize(|v: &[f64]| eval(v).map_or(f64::NEG_INFINITY, |(_, l)| l), &v0, &[], &self.settings.inner).ok()?;
        let (params, l) = eval(&best.argmax)?;
        Some(ProfilePoint { psi, profile_loglik: l, params, inner_converged: best.converged })
    }

    /// Pulls `warm` towards the constraint with increasing quadratic penalties.
    fn penalized_start(&self, psi: f64, warm: &[f64]) -> Option<Vec<f64>> {
        let scale = psi.abs().max(1.0);
        let mut t = self.reparam.to_free(warm);
        for &rho in &self.settings.penalty_schedule {
            let objective = |t: &[f64]| {
                let w = self.reparam.from_free(t);
                let Some(l) = self.loglik(&w) else { return f64::NEG_INFINITY };
                match self.g.value(&w) {
                    Ok(v) if v.is_finite() => l - 0.5 * rho * ((v - psi) / scale).powi(2),
                    _ => f64::NEG_INFINITY,
                }
            };
            t = maximize(objective, &t, &[], &self.settings.inner).ok()?.argmax;
        }
        let w = self.reparam.from_free(&t);
        self.space.contains(&w).then_some(w)
    }

    fn point(&self, psi: f64, warm: &[f64]) -> Result<ProfilePoint> {
        if !psi.is_finite() {
            return Err(Error::ParameterDomain(format!("interest value must be finite, got {psi}")));
        }
        for p in self.pivots(warm) {
            if let Some(pt) = self.reduced(psi, p, warm) {
                return Ok(pt);
            }
        }
        if self.g.coordinate().is_none() {
            if let Some(start) = self.penalized_start(psi, warm) {
                for p in self.pivots(&start) {
                    if let Some(pt) = self.reduced(psi, p, &start) {
                        return Ok(pt);
                    }
                }
            }
        }
        Err(Error::Infeasible {
            psi,
            reason: format!("no parameter value inside the space satisfies {} = {psi}", self.g.label()),
        })
    }
}

pub fn profile_loglik(
    model: &dyn Model,
    data: &Dataset,
    g: &dyn InterestFn,
    psi: f64,
    warm_start: Option<&[f64]>,
) -> Result<ProfilePoint> {
    profile_loglik_with(model, data, g, psi, warm_start, &ProfileSettings::default())
}

/// `l_g(ψ) = max{ l(ω) : g(ω) = ψ }` together with the maximizer.
pub fn profile_loglik_with(
    model: &dyn Model,
    data: &Dataset,
    g: &dyn InterestFn,
    psi: f64,
    warm_start: Option<&[f64]>,
    settings: &ProfileSettings,
) -> Result<ProfilePoint> {
    model.check_data(data)?;
    let warm = match warm_start {
        Some(w) if model.space().contains(w) => w.to_vec(),
        _ => fit_mle(model, data, None)?.params,
    };
    Profiler::new(model, data, g, settings).point(psi, &warm)
}

/// `l(ω̂) − χ²_level[1]/2`, the profile log-likelihood at the interval endpoints.
pub fn cutoff(max_loglik: f64, level: f64) -> Result<f64> {
    check_level(level)?;
    Ok(max_loglik - chisq_quantile(level, 1)? / 2.0)
}

fn bracket_step(fit: &FitResult, g: &dyn InterestFn, psi_hat: f64) -> f64 {
    match delta_standard_error(fit, g) {
        Ok((se, _)) if se.is_finite() && se > 0.0 => se,
        _ => psi_hat.abs() * 0.1 + 0.1,
    }
}

struct SideOutcome {
    endpoint: f64,
    unbounded: bool,
    flags: Vec<IntervalFlag>,
}

fn search_side(
    prof: &Profiler<'_>,
    start: &ProfilePoint,
    cut: f64,
    step: f64,
    dir: f64,
) -> Result<SideOutcome> {
    let s = prof.settings;
    let mut flags = Vec::new();
    let flag = |f: IntervalFlag, flags: &mut Vec<IntervalFlag>| {
        if !flags.contains(&f) {
            flags.push(f);
        }
    };
    let mut prev = start.clone();
    let mut prev_h = start.profile_loglik - cut;
    let mut inc = step;
    let mut expansions = 0;
    let mut halvings = 0;
    let mut crossing: Option<(ProfilePoint, ProfilePoint)> = None;
    let mut beyond = 0;
    let mono_tol = 1e-7 * cut.abs().max(1.0);
    while expansions < s.max_expansions {
        let psi = prev.psi + dir * inc;
        let pt = match prof.point(psi, &prev.params) {
            Ok(pt) => pt,
            Err(Error::Infeasible { .. }) if halvings < 30 => {
                inc *= 0.5;
                halvings += 1;
                continue;
            }
            Err(Error::Infeasible { .. }) => break,
            Err(e) => return Err(e),
        };
        expansions += 1;
        if !pt.inner_converged {
            flag(IntervalFlag::InnerNotConverged, &mut flags);
        }
        let h = pt.profile_loglik - cut;
        if h > prev_h + mono_tol {
            flag(IntervalFlag::NonMonotone, &mut flags);
        }
        if crossing.is_some() {
            if h >= 0.0 {
                flag(IntervalFlag::MultipleRoots, &mut flags);
                crossing = None;
            } else {
                beyond += 1;
            }
        } else if h < 0.0 {
            crossing = Some((prev.clone(), pt.clone()));
            beyond = 0;
        }
        prev = pt;
        prev_h = h;
        if crossing.is_some() && beyond >= s.lookahead {
            break;
        }
    }
    let Some((inside, outside)) = crossing else {
        return Ok(SideOutcome { endpoint: dir * f64::INFINITY, unbounded: true, flags });
    };

    let mut visited = vec![inside.clone(), outside.clone()];
    let mut failure: Option<Error> = None;
    let f = |psi: f64| -> f64 {
        let warm = visited
            .iter()
            .min_by(|a, b| (a.psi - psi).abs().total_cmp(&(b.psi - psi).abs()))
            .map(|p| p.params.clone())
            .unwrap_or_default();
        match prof.point(psi, &warm) {
            Ok(pt) => {
                let h = pt.profile_loglik - cut;
                visited.push(pt);
                h
            }
            Err(e) => {
                failure.get_or_insert(e);
                f64::NAN
            }
        }
    };
    let (a, b) = (inside.psi, outside.psi);
    let (ha, hb) = (inside.profile_loglik - cut, outside.profile_loglik - cut);
    let bracket = if a < b { RootBracket::new(a, b, ha, hb)? } else { RootBracket::new(b, a, hb, ha)? };
    let root = find_root_with(f, bracket, &s.root);
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(SideOutcome { endpoint: root?, unbounded: false, flags })
}

pub fn profile_interval(
    model: &dyn Model,
    data: &Dataset,
    fit: &FitResult,
    g: &dyn InterestFn,
    level: f64,
) -> Result<IntervalResult> {
    profile_interval_with(model, data, fit, g, level, &ProfileSettings::default())
}

/// `{ψ : l_g(ψ) ≥ l(ω̂) − χ²_level[1]/2}`, endpoints located by stepping
/// out from `ψ̂` until the profile drops below the cutoff and then
/// refining with Brent's method.
pub fn profile_interval_with(
    model: &dyn Model,
    data: &Dataset,
    fit: &FitResult,
    g: &dyn InterestFn,
    level: f64,
    settings: &ProfileSettings,
) -> Result<IntervalResult> {
    let cut = cutoff(fit.max_loglik, level)?;
    let psi_hat = g.value(&fit.params)?;
    let step = settings.step_factor * bracket_step(fit, g, psi_hat);
    let prof = Profiler::new(model, data, g, settings);
    let start = ProfilePoint {
        psi: psi_hat,
        profile_loglik: fit.max_loglik,
        params: fit.params.clone(),
        inner_converged: fit.converged,
    };
    let lo = search_side(&prof, &start, cut, step, -1.0)?;
    let hi = search_side(&prof, &start, cut, step, 1.0)?;
    let mut flags = Vec::new();
    if lo.unbounded {
        flags.push(IntervalFlag::LowerUnbounded);
    }
    if hi.unbounded {
        flags.push(IntervalFlag::UpperUnbounded);
    }
    for f in lo.flags.into_iter().chain(hi.flags) {
        if !flags.contains(&f) {
            flags.push(f);
        }
    }
    Ok(IntervalResult {
        estimate: psi_hat,
        lower: lo.endpoint.min(psi_hat),
        upper: hi.endpoint.max(psi_hat),
        level,
        method: Method::Profile,
        standard_error: None,
        condition: None,
        flags,
    })
}

/// Endpoints computed as the extrema of `g` over the boundary of the
/// likelihood region, next to the root-finding ones.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtremumCheck {
    pub lower: f64,
    pub upper: f64,
    pub profile_lower: f64,
    pub profile_upper: f64,
    /// Largest of the two endpoint discrepancies, relative to `max(1, |endpoint|)`.
    pub max_rel_diff: f64,
    pub agrees: bool,
    pub starts: usize,
}

/// Relative tolerance used by [`constrained_extremum_check`].
pub const EXTREMUM_TOLERANCE: f64 = 1e-4;

/// Boundary points of the likelihood region along each coordinate ray
/// (both directions) on the transformed scale. Fails if some ray never
/// leaves the region.
fn boundary_starts(
    model: &dyn Model,
    data: &Dataset,
    fit: &FitResult,
    reparam: &Reparameterization,
    cut: f64,
) -> Result<Vec<Vec<f64>>> {
    let t_hat = reparam.to_free(&fit.params);
    let d = t_hat.len();
    let c = |t: &[f64]| {
        let w = reparam.from_free(t);
        if !model.space().contains(&w) {
            return f64::NEG_INFINITY;
        }
        match model.raw_log_likelihood(data, &w) {
            Ok(l) if l.is_finite() => l - cut,
            _ => f64::NEG_INFINITY,
        }
    };
    let maps = reparam.maps();
    let mut starts = Vec::with_capacity(2 * d);
    for i in 0..d {
        let a = maps[i].jacobian(t_hat[i]);
        let info = fit.observed_info[(i, i)] * a * a;
        let r0 = if info > 0.0 && info.is_finite() { 1.0 / info.sqrt() } else { 0.1 };
        for dir in [-1.0, 1.0] {
            let along = |r: f64| {
                let mut t = t_hat.clone();
                t[i] += dir * r;
                t
            };
            let mut inner = 0.0;
            let mut r = r0;
            let mut found = None;
            for _ in 0..80 {
                let v = c(&along(r));
                if v < 0.0 {
                    found = Some(r);
                    break;
                }
                inner = r;
                r *= 1.5;
            }
            let Some(outer) = found else {
                return Err(Error::UnboundedRegion(format!(
                    "likelihood region does not close along parameter {} ({})",
                    model.space().names()[i],
                    if dir < 0.0 { "decreasing" } else { "increasing" }
                )));
            };
            let f_out = c(&along(outer));
            let f_in = c(&along(inner));
            let settings = RootSettings { f_tolerance: 1e-12, f_scale: 1.0, x_rel_tolerance: 1e-14, max_iterations: 300 };
            let r_star = if f_out.is_finite() {
                find_root_with(|r| c(&along(r)), RootBracket::new(inner, outer, f_in, f_out)?, &settings)?
            } else {
                // -inf outside the domain: bisect until the outer value is finite
                let (mut lo, mut hi) = (inner, outer);
                let mut fh = f_out;
                while !fh.is_finite() && hi - lo > 1e-14 {
                    let mid = 0.5 * (lo + hi);
                    let fm = c(&along(mid));
                    if fm >= 0.0 {
                        lo = mid;
                    } else {
                        hi = mid;
                        fh = fm;
                    }
                }
                let fl = c(&along(lo));
                if fh.is_finite() {
                    find_root_with(|r| c(&along(r)), RootBracket::new(lo, hi, fl, fh)?, &settings)?
                } else {
                    lo
                }
            };
            starts.push(along(r_star));
        }
    }
    Ok(starts)
}

/// Optimum of `sense · g` over `{l(ω) = cutoff}` by an augmented
/// Lagrangian started at `t0`. Returns `(g, |constraint residual|)`.
///
/// The objective is `atan((g − ψ̂)/scale)`: monotone in `g`, so the
/// extremal point is unchanged, and bounded, which keeps the penalized
/// problem bounded above even when `g` grows exponentially on the
/// transformed scale.
#[allow(clippy::too_many_arguments)]
fn augmented_lagrangian(
    model: &dyn Model,
    data: &Dataset,
    g: &dyn InterestFn,
    reparam: &Reparameterization,
    cut: f64,
    psi_hat: f64,
    scale: f64,
    sense: f64,
    t0: &[f64],
) -> Option<(f64, f64)> {
    let objective = |t: &[f64]| -> Option<(f64, f64)> {
        let w = reparam.from_free(t);
        if !model.space().contains(&w) {
            return None;
        }
        let l = model.raw_log_likelihood(data, &w).ok().filter(|v| v.is_finite())?;
        let v = g.value(&w).ok().filter(|v| v.is_finite())?;
        Some((sense * ((v - psi_hat) / scale).atan(), l - cut))
    };
    let settings = OptimizerSettings { rel_tolerance: 1e-13, max_iterations: 1000, ..OptimizerSettings::default() };

    let mut t = t0.to_vec();
    objective(&t)?;
    // least-squares multiplier from ∇f = λ∇c at the start
    let gf = numeric_gradient(|t| objective(t).map_or(f64::NAN, |o| o.0), &t, 1e-6).ok()?;
    let gc = numeric_gradient(|t| objective(t).map_or(f64::NAN, |o| o.1), &t, 1e-6).ok()?;
    let cc: f64 = gc.iter().map(|x| x * x).sum();
    let mut lambda = if cc > 0.0 { gf.iter().zip(&gc).map(|(a, b)| a * b).sum::<f64>() / cc } else { 0.0 };
    let mut rho = 10.0;
    let mut c_prev = f64::INFINITY;
    let mut f_prev = f64::NAN;
    for _ in 0..60 {
        let phi = |t: &[f64]| match objective(t) {
            Some((f, c)) => f - lambda * c - 0.5 * rho * c * c,
            None => f64::NEG_INFINITY,
        };
        let m = maximize(phi, &t, &[], &settings).ok()?;
        t = m.argmax;
        let (f, c) = objective(&t)?;
        lambda += rho * c;
        if c.abs() < 1e-11 && (f - f_prev).abs() < 1e-13 {
            break;
        }
        if c.abs() > 0.25 * c_prev {
            rho = (rho * 10.0).min(1e10);
        }
        c_prev = c.abs();
        f_prev = f;
    }
    let w = reparam.from_free(&t);
    let (_, c) = objective(&t)?;
    Some((g.value(&w).ok()?, c.abs()))
}

/// Lower and upper endpoints as `min` / `max` of `g` over the level set
/// `l(ω) = l(ω̂) − χ²_level[1]/2`, computed without the profile.
pub fn constrained_extremum(
    model: &dyn Model,
    data: &Dataset,
    fit: &FitResult,
    g: &dyn InterestFn,
    level: f64,
) -> Result<(f64, f64, usize)> {
    let cut = cutoff(fit.max_loglik, level)?;
    let reparam = Reparameterization::new(model.space().bounds());
    let starts = boundary_starts(model, data, fit, &reparam, cut)?;
    let value = |t: &[f64]| g.value(&reparam.from_free(t)).map_err(Error::from);
    if fit.params.len() == 1 {
        let a = value(&starts[0])?;
        let b = value(&starts[1])?;
        return Ok((a.min(b), a.max(b), 2));
    }
    let psi_hat = g.value(&fit.params)?;
    let scale = bracket_step(fit, g, psi_hat);
    let mut best = [f64::INFINITY, f64::NEG_INFINITY];
    for (k, sense) in [-1.0, 1.0].into_iter().enumerate() {
        for t0 in &starts {
            if let Some((v, resid)) = augmented_lagrangian(model, data, g, &reparam, cut, psi_hat, scale, sense, t0) {
                if resid <= 1e-7 {
                    best[k] = if sense < 0.0 { best[k].min(v) } else { best[k].max(v) };
                }
            }
        }
    }
    if !best[0].is_finite() || !best[1].is_finite() {
        return Err(Error::Numerics(crate::error::NumericsError::NotConverged {
            iterations: 0,
            best: vec![best[0], best[1]],
            value: f64::NAN,
        }));
    }
    Ok((best[0], best[1], starts.len()))
}

/// Runs both endpoint computations and reports their agreement.
pub fn constrained_extremum_check(
    model: &dyn Model,
    data: &Dataset,
    fit: &FitResult,
    g: &dyn InterestFn,
    level: f64,
) -> Result<ExtremumCheck> {
    let (lower, upper, starts) = constrained_extremum(model, data, fit, g, level)?;
    let prof = profile_interval(model, data, fit, g, level)?;
    let rel = |a: f64, b: f64| (a - b).abs() / b.abs().max(1.0);
    let max_rel_diff = rel(lower, prof.lower).max(rel(upper, prof.upper));
    Ok(ExtremumCheck {
        lower,
        upper,
        profile_lower: prof.lower,
        profile_upper: prof.upper,
        max_rel_diff,
        agrees: max_rel_diff <= EXTREMUM_TOLERANCE,
        starts,
    })
}

/// Profile log-likelihood on a grid. The default range is the 0.999
/// profile interval widened by 10% on each side.
pub fn profile_curve(
    model: &dyn Model,
    data: &Dataset,
    fit: &FitResult,
    g: &dyn InterestFn,
    range: Option<(f64, f64)>,
    grid_size: usize,
) -> Result<ProfileTrace> {
    profile_curve_with(model, data, fit, g, range, grid_size, &ProfileSettings::default())
}

/// Shrinks the default padding beyond an interval end until the padded
/// end is inside the image of `g`; returns its magnitude.
fn feasible_pad(prof: &Profiler<'_>, end: f64, pad: f64, warm: &[f64]) -> f64 {
    let mut pad = pad;
    for _ in 0..20 {
        if !matches!(prof.point(end + pad, warm), Err(Error::Infeasible { .. })) {
            return pad.abs();
        }
        pad *= 0.5;
    }
    0.0
}

pub fn profile_curve_with(
    model: &dyn Model,
    data: &Dataset,
    fit: &FitResult,
    g: &dyn InterestFn,
    range: Option<(f64, f64)>,
    grid_size: usize,
    settings: &ProfileSettings,
) -> Result<ProfileTrace> {
    if grid_size < 2 {
        return Err(Error::ParameterDomain(format!("grid needs at least 2 points, got {grid_size}")));
    }
    let psi_hat = g.value(&fit.params)?;
    let (lo, hi) = match range {
        Some((a, b)) if a.is_finite() && b.is_finite() && a < b => (a, b),
        Some((a, b)) => return Err(Error::ParameterDomain(format!("invalid profile range ({a}, {b})"))),
        None => {
            let wide = profile_interval_with(model, data, fit, g, 0.999, settings)?;
            let se = bracket_step(fit, g, psi_hat);
            let a = if wide.lower.is_finite() { wide.lower } else { psi_hat - 5.0 * se };
            let b = if wide.upper.is_finite() { wide.upper } else { psi_hat + 5.0 * se };
            let pad = 0.1 * (b - a);
            let prof = Profiler::new(model, data, g, settings);
            (a - feasible_pad(&prof, a, -pad, &fit.params), b + feasible_pad(&prof, b, pad, &fit.params))
        }
    };
    let grid: Vec<f64> =
        (0..grid_size).map(|i| lo + (hi - lo) * i as f64 / (grid_size - 1) as f64).collect();
    let below: Vec<f64> = grid.iter().rev().copied().filter(|&p| p < psi_hat).collect();
    let above: Vec<f64> = grid.iter().copied().filter(|&p| p >= psi_hat).collect();
    let prof = Profiler::new(model, data, g, settings);
    let sweep = |psis: &[f64]| -> Vec<ProfilePoint> {
        let mut warm = fit.params.clone();
        psis.iter()
            .map(|&psi| match prof.point(psi, &warm) {
                Ok(pt) => {
                    warm = pt.params.clone();
                    pt
                }
                Err(_) => ProfilePoint {
                    psi,
                    profile_loglik: f64::NEG_INFINITY,
                    params: vec![],
                    inner_converged: false,
                },
            })
            .collect()
    };
    let (mut left, right) = rayon::join(|| sweep(&below), || sweep(&above));
    left.reverse();
    left.extend(right);
    Ok(ProfileTrace { points: left, psi_hat, max_loglik: fit.max_loglik })
}
