//! Property tests for the invariants of each module.

use std::sync::Arc;

use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use proflik::catalog::{exponential_logdensity, gamma_logdensity, gamma_logsurvival, exponential_logsurvival};
use proflik::estimation::median_curvature_ratio;
use proflik::model::{log_likelihood, observed_information, relative_log_likelihood};
use proflik::numerics::special::{chisq_quantile, std_normal_cdf, std_normal_quantile};
use proflik::numerics::{find_root, numeric_gradient, RootBracket};
use proflik::profile::cutoff;
use proflik::reproduce::{control, control_gamma_model, leukemia, two_exponential_model};
use proflik::*;

fn exp_model(n: usize) -> SamplingModel {
    SamplingModel::of(ExponentialModel::new(), n).unwrap()
}

fn cfg(cases: u32) -> ProptestConfig {
    ProptestConfig { cases, ..ProptestConfig::default() }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}

// ---------------------------------------------------------------- numerics

proptest! {
    #![proptest_config(cfg(512))]

    #[test]
    fn normal_cdf_inverts_quantile(p in 0.001f64..0.999) {
        let z = std_normal_quantile(p).unwrap();
        prop_assert!((std_normal_cdf(z) - p).abs() <= 1e-9);
    }

    #[test]
    fn gradient_of_cubic(c in prop::array::uniform4(-5.0f64..5.0), x in -10.0f64..10.0) {
        let f = |v: &[f64]| c[0] + c[1] * v[0] + c[2] * v[0] * v[0] + c[3] * v[0].powi(3);
        let exact = c[1] + 2.0 * c[2] * x + 3.0 * c[3] * x * x;
        let g = numeric_gradient(f, &[x], 1e-6).unwrap()[0];
        prop_assert!((g - exact).abs() <= 1e-6 * exact.abs().max(1.0), "{g} vs {exact}");
    }

    #[test]
    fn gradient_of_bivariate_quadratic(a in -3.0f64..3.0, b in -3.0f64..3.0, c in -3.0f64..3.0,
                                       x in -4.0f64..4.0, y in -4.0f64..4.0) {
        let f = |v: &[f64]| a * v[0] * v[0] + b * v[0] * v[1] + c * v[1].powi(3);
        let g = numeric_gradient(f, &[x, y], 1e-6).unwrap();
        let ex = [2.0 * a * x + b * y, b * x + 3.0 * c * y * y];
        for k in 0..2 {
            prop_assert!((g[k] - ex[k]).abs() <= 1e-6 * ex[k].abs().max(1.0));
        }
    }

    #[test]
    fn root_satisfies_residual_bound(r in -50.0f64..50.0, a in 0.01f64..10.0, b in 0.0f64..2.0,
                                     left in 0.1f64..30.0, right in 0.1f64..30.0) {
        let f = |x: f64| a * (x - r) + b * (x - r).powi(3);
        let x = find_root(f, RootBracket::from_fn(f, r - left, r + right).unwrap()).unwrap();
        prop_assert!(x >= r - left && x <= r + right);
        let ok_residual = f(x).abs() <= 1e-9;
        let ok_width = (x - r).abs() <= 1e-10 * x.abs().max(1.0) * 10.0;
        prop_assert!(ok_residual || ok_width, "x={x} f={}", f(x));
    }
}

#[test]
fn chisq_quantile_strictly_increasing() {
    for df in 1..=5 {
        let mut prev = 0.0;
        for k in 1..1000 {
            let q = chisq_quantile(k as f64 / 1000.0, df).unwrap();
            assert!(q > prev, "df {df} p {k}");
            prev = q;
        }
    }
}

// -------------------------------------------------------------- model-core

/// The same model with an arbitrary constant added to the log-likelihood.
struct Shifted {
    inner: SamplingModel,
    c: f64,
}

impl Model for Shifted {
    fn space(&self) -> &ParameterSpace {
        self.inner.space()
    }
    fn raw_log_likelihood(&self, data: &Dataset, p: &[f64]) -> Result<f64> {
        Ok(self.inner.raw_log_likelihood(data, p)? + self.c)
    }
    fn check_data(&self, data: &Dataset) -> Result<()> {
        self.inner.check_data(data)
    }
    fn initial_estimate(&self, data: &Dataset) -> Result<Vec<f64>> {
        self.inner.initial_estimate(data)
    }
    fn simulate(&self, p: &[f64], rng: &mut dyn RngCore) -> Result<Dataset> {
        self.inner.simulate(p, rng)
    }
}

/// Exponential model parameterized by `θ = ln μ`.
struct LogMean {
    inner: SamplingModel,
    space: ParameterSpace,
}

impl LogMean {
    fn new(n: usize) -> Self {
        Self { inner: exp_model(n), space: ParameterSpace::new([("theta", Bound::REAL)]).unwrap() }
    }
}

impl Model for LogMean {
    fn space(&self) -> &ParameterSpace {
        &self.space
    }
    fn raw_log_likelihood(&self, data: &Dataset, p: &[f64]) -> Result<f64> {
        self.inner.raw_log_likelihood(data, &[p[0].exp()])
    }
    fn check_data(&self, data: &Dataset) -> Result<()> {
        self.inner.check_data(data)
    }
    fn initial_estimate(&self, data: &Dataset) -> Result<Vec<f64>> {
        Ok(vec![self.inner.initial_estimate(data)?[0].ln()])
    }
    fn simulate(&self, p: &[f64], rng: &mut dyn RngCore) -> Result<Dataset> {
        self.inner.simulate(&[p[0].exp()], rng)
    }
}

fn survival_data() -> impl Strategy<Value = Vec<(f64, bool)>> {
    prop::collection::vec((0.1f64..40.0, any::<bool>()), 2..15)
        .prop_filter("needs an event", |v| v.iter().any(|(_, c)| !c))
}

fn to_dataset(v: &[(f64, bool)]) -> Dataset {
    Dataset::new(
        v.iter().map(|&(y, c)| if c { Observation::censored(y) } else { Observation::exact(y) }).collect(),
    )
    .unwrap()
}

proptest! {
    #![proptest_config(cfg(128))]

    #[test]
    fn additive_constant_is_irrelevant(v in survival_data(), c in -1e3f64..1e3, mu in 0.5f64..60.0) {
        let data = to_dataset(&v);
        let base = exp_model(v.len());
        let shifted = Shifted { inner: exp_model(v.len()), c };
        let mle = fit_mle(&base, &data, None).unwrap().params;
        let a = relative_log_likelihood(&base, &data, &[mu], &mle).unwrap();
        let b = relative_log_likelihood(&shifted, &data, &[mu], &mle).unwrap();
        prop_assert!((a - b).abs() <= 1e-9 * a.abs().max(1.0));
        let fs = fit_mle(&shifted, &data, None).unwrap();
        prop_assert!(rel(fs.params[0], mle[0]) < 1e-8);
    }

    #[test]
    fn uncensored_likelihood_is_sum_of_densities(ys in prop::collection::vec(0.01f64..50.0, 1..30),
                                                 shape in 0.3f64..8.0, mean in 0.5f64..30.0) {
        let data = Dataset::exact(&ys).unwrap();
        let g = SamplingModel::of(GammaModel::new(), ys.len()).unwrap();
        let sum: f64 = ys.iter().map(|&y| gamma_logdensity(y, shape, mean).unwrap()).sum();
        prop_assert_eq!(log_likelihood(&g, &data, &[shape, mean]).unwrap(), sum);
        let sum: f64 = ys.iter().map(|&y| exponential_logdensity(y, mean).unwrap()).sum();
        prop_assert!((log_likelihood(&exp_model(ys.len()), &data, &[mean]).unwrap() - sum).abs()
            <= 1e-12 * sum.abs());
    }

    #[test]
    fn censoring_never_decreases_exponential_mle(v in survival_data(), pick in any::<prop::sample::Index>()) {
        let exact: Vec<usize> = (0..v.len()).filter(|&i| !v[i].1).collect();
        prop_assume!(exact.len() >= 2);
        let i = exact[pick.index(exact.len())];
        let mut more = v.clone();
        more[i].1 = true;
        let m = exp_model(v.len());
        let before = fit_mle(&m, &to_dataset(&v), None).unwrap().params[0];
        let after = fit_mle(&m, &to_dataset(&more), None).unwrap().params[0];
        prop_assert!(after >= before * (1.0 - 1e-10), "{before} -> {after}");
    }

    #[test]
    fn exponential_mle_is_total_time_over_events(v in survival_data()) {
        let data = to_dataset(&v);
        let fit = fit_mle(&exp_model(v.len()), &data, None).unwrap();
        let closed = data.total_time() / data.event_count() as f64;
        prop_assert!(rel(fit.params[0], closed) < 1e-8);
    }

    #[test]
    fn reparameterized_fit_agrees(v in survival_data()) {
        let data = to_dataset(&v);
        let a = fit_mle(&exp_model(v.len()), &data, None).unwrap();
        let b = fit_mle(&LogMean::new(v.len()), &data, None).unwrap();
        prop_assert!(rel(b.params[0].exp(), a.params[0]) < 1e-8);
        prop_assert!((a.max_loglik - b.max_loglik).abs() < 1e-10 * a.max_loglik.abs().max(1.0));
    }
}

fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    m.clone().symmetric_eigen().eigenvalues.min()
}

fn simulated(model: &dyn Model, params: &[f64], seed: u64) -> Dataset {
    model.simulate(params, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap()
}

proptest! {
    #![proptest_config(cfg(48))]

    #[test]
    fn information_is_psd_and_fits_are_unimodal(seed in any::<u64>(), shape in 0.5f64..6.0,
                                                mean in 1.0f64..30.0, n in 8usize..60) {
        let cases: Vec<(Box<dyn Model>, Vec<f64>)> = vec![
            (Box::new(exp_model(n)), vec![mean]),
            (Box::new(SamplingModel::of(GammaModel::new(), n).unwrap()), vec![shape, mean]),
            (Box::new(SamplingModel::of(NormalKnownSigmaModel::new(shape).unwrap(), n).unwrap()), vec![mean]),
        ];
        for (model, truth) in cases {
            let data = simulated(model.as_ref(), &truth, seed);
            let fit = fit_mle(model.as_ref(), &data, None).unwrap();
            prop_assert!(fit.converged);
            prop_assert!(model.space().contains(&fit.params));
            prop_assert!(fit.observed_info == fit.observed_info.transpose());
            prop_assert!(min_eigenvalue(&fit.observed_info) >= -1e-6);
            let j = observed_information(model.as_ref(), &data, &fit.params).unwrap();
            prop_assert!(min_eigenvalue(&j) >= -1e-6);
            for scale in [0.1, 0.5, 2.0, 5.0, 10.0] {
                let init: Vec<f64> = fit.params.iter().map(|p| p * scale).collect();
                let other = fit_mle(model.as_ref(), &data, Some(&init)).unwrap();
                prop_assert!((other.max_loglik - fit.max_loglik).abs() <= 1e-6,
                    "init scale {scale}: {} vs {}", other.max_loglik, fit.max_loglik);
            }
        }
    }
}

#[test]
fn catalog_fits_from_dispersed_starts() {
    let tm = two_exponential_model();
    let data = leukemia();
    let fit = fit_mle(&tm, &data, None).unwrap();
    for init in [[1.0, 1.0], [200.0, 0.5], [0.5, 200.0], [10.0, 10.0], [1000.0, 1000.0]] {
        let f = fit_mle(&tm, &data, Some(&init)).unwrap();
        assert!((f.max_loglik - fit.max_loglik).abs() <= 1e-6);
    }
    let g = control_gamma_model();
    let c = control();
    let fit = fit_mle(&g, &c, None).unwrap();
    for init in [[0.1, 1.0], [20.0, 50.0], [1.0, 8.0], [0.3, 30.0], [8.0, 2.0]] {
        let f = fit_mle(&g, &c, Some(&init)).unwrap();
        assert!((f.max_loglik - fit.max_loglik).abs() <= 1e-6, "{init:?}");
    }
}

// ----------------------------------------------------------- model-catalog

/// Simpson's rule for ∫ f(e^u) e^u du on `[a, b]`.
fn log_scale_integral(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let term = |u: f64| {
        let y = u.exp();
        f(y) * y
    };
    let mut s = term(a) + term(b);
    for k in 1..n {
        s += term(a + k as f64 * h) * if k % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * h / 3.0
}

proptest! {
    #![proptest_config(cfg(64))]

    #[test]
    fn densities_integrate_to_one(shape in 0.5f64..8.0, mean in 0.2f64..50.0) {
        let hi = (mean * 80.0).ln();
        let g = log_scale_integral(|y| gamma_logdensity(y, shape, mean).unwrap().exp(), -60.0, hi, 40_000);
        prop_assert!((g - 1.0).abs() < 1e-6, "gamma {g}");
        let e = log_scale_integral(|y| exponential_logdensity(y, mean).unwrap().exp(), -60.0, hi, 40_000);
        prop_assert!((e - 1.0).abs() < 1e-6, "exponential {e}");
    }

    #[test]
    fn normal_density_integrates_to_one(mu in -20.0f64..20.0, sigma in 0.1f64..10.0) {
        let (a, b, n) = (mu - 12.0 * sigma, mu + 12.0 * sigma, 20_000);
        let h = (b - a) / n as f64;
        let f = |x: f64| proflik::catalog::normal_logdensity(x, mu, sigma).unwrap().exp();
        let mut s = f(a) + f(b);
        for k in 1..n {
            s += f(a + k as f64 * h) * if k % 2 == 1 { 4.0 } else { 2.0 };
        }
        prop_assert!((s * h / 3.0 - 1.0).abs() < 1e-6);
    }

    #[test]
    fn log_survival_matches_integrated_density(shape in 0.5f64..6.0, mean in 0.5f64..30.0, q in 0.01f64..0.99) {
        // y at roughly the q-th quantile keeps the survival away from 0 and 1
        let y = mean * (q / (1.0 - q)).powf(0.5).max(0.05);
        let cdf = log_scale_integral(|t| gamma_logdensity(t, shape, mean).unwrap().exp(), -60.0, y.ln(), 40_000);
        let s = gamma_logsurvival(y, shape, mean).unwrap();
        // quadrature of 1 − F is only informative while F stays away from 1
        prop_assume!(s > -7.0);
        prop_assert!((s - (1.0 - cdf).ln()).abs() < 1e-8, "{s} vs {}", (1.0 - cdf).ln());
        prop_assume!(y / mean < 7.0);
        let cdf = log_scale_integral(|t| exponential_logdensity(t, mean).unwrap().exp(), -60.0, y.ln(), 40_000);
        prop_assert!((exponential_logsurvival(y, mean).unwrap() - (1.0 - cdf).ln()).abs() < 1e-8);
    }

    #[test]
    fn log_survival_non_increasing(shape in 0.3f64..8.0, mean in 0.5f64..30.0, a in 0.0f64..100.0, d in 0.0f64..50.0) {
        prop_assert!(gamma_logsurvival(a + d, shape, mean).unwrap() <= gamma_logsurvival(a, shape, mean).unwrap());
        prop_assert!(exponential_logsurvival(a + d, mean).unwrap() <= exponential_logsurvival(a, mean).unwrap());
    }

    #[test]
    fn sampling_and_independence_additivity(v in survival_data(), w in survival_data(),
                                            m1 in 0.5f64..80.0, m2 in 0.5f64..80.0) {
        let d1 = to_dataset(&v);
        let d2 = to_dataset(&w);
        let fam = ExponentialModel::new();
        let terms: f64 = d1
            .observations()
            .iter()
            .map(|o| if o.is_censored() { fam.log_survival(o.value, &[m1]) } else { fam.log_density(o.value, &[m1]) })
            .sum();
        prop_assert_eq!(log_likelihood(&exp_model(v.len()), &d1, &[m1]).unwrap(), terms);

        let tm = IndependenceModel::new(vec![
            ("drug".into(), Box::new(SamplingModel::of(ExponentialModel::named("m1"), v.len()).unwrap()) as Box<dyn Model>),
            ("control".into(), Box::new(SamplingModel::of(ExponentialModel::named("m2"), w.len()).unwrap())),
        ]).unwrap();
        let joint = Dataset::concat_labelled(&[("drug".into(), d1.clone()), ("control".into(), d2.clone())]).unwrap();
        let parts = log_likelihood(&exp_model(v.len()), &d1, &[m1]).unwrap()
            + log_likelihood(&exp_model(w.len()), &d2, &[m2]).unwrap();
        prop_assert_eq!(log_likelihood(&tm, &joint, &[m1, m2]).unwrap(), parts);
    }
}

// -------------------------------------------------------------- estimation

#[test]
fn median_curvature_always_smaller() {
    for n in (3..400).step_by(2) {
        let r = median_curvature_ratio(n).unwrap();
        assert!(r < 1.0 && r > 0.0, "n={n}");
    }
}

// -------------------------------------------------------------- wald-delta

proptest! {
    #![proptest_config(cfg(64))]

    #[test]
    fn delta_symmetric_and_affine(seed in any::<u64>(), shape in 0.8f64..5.0, mean in 2.0f64..20.0,
                                  a in 0.01f64..20.0, b in -50.0f64..50.0, level in 0.5f64..0.999) {
        let model = SamplingModel::of(GammaModel::new(), 25).unwrap();
        let data = simulated(&model, &[shape, mean], seed);
        let fit = fit_mle(&model, &data, None).unwrap();
        for src in ["gamma_sd", "mean", "shape * mean", "log(mean) - shape"] {
            let g = InterestFunction::from_spec(src, model.space()).unwrap();
            let di = delta_interval(&fit, &g, level).unwrap();
            prop_assert!(di.lower <= di.estimate && di.estimate <= di.upper);
            prop_assert!(((di.upper - di.estimate) - (di.estimate - di.lower)).abs() <= 1e-10 * di.estimate.abs().max(1.0));
            let h = InterestFunction::parse(&format!("{a} * ({}) + ({b})", g.ast()), model.space()).unwrap();
            let hi = delta_interval(&fit, &h, level).unwrap();
            let scale = (a * di.upper + b).abs().max(1.0);
            prop_assert!((hi.lower - (a * di.lower + b)).abs() <= 1e-6 * scale);
            prop_assert!((hi.upper - (a * di.upper + b)).abs() <= 1e-6 * scale);
        }
        for k in 0..2 {
            let w = wald_interval(&fit, k, level).unwrap();
            prop_assert!(w.lower <= w.estimate && w.estimate <= w.upper);
        }
    }
}

// ----------------------------------------------------------------- profile

proptest! {
    #![proptest_config(cfg(32))]

    #[test]
    fn profile_constraint_and_dominance(s in 0.3f64..3.0, m in 0.3f64..3.0) {
        let model = control_gamma_model();
        let data = control();
        let fit = fit_mle(&model, &data, None).unwrap();
        let omega = [fit.params[0] * s, fit.params[1] * m];
        let l = log_likelihood(&model, &data, &omega).unwrap();
        for src in ["gamma_sd", "mean", "shape", "mean * shape"] {
            let g = InterestFunction::from_spec(src, model.space()).unwrap();
            let psi = g.eval(&omega).unwrap();
            let p = profile_loglik(&model, &data, &g, psi, Some(&fit.params)).unwrap();
            prop_assert!((g.eval(&p.params).unwrap() - psi).abs() <= 1e-8 * psi.abs().max(1.0));
            prop_assert!(p.profile_loglik <= fit.max_loglik + 1e-9);
            prop_assert!(p.profile_loglik >= l - 1e-9, "{src}: {} < {l}", p.profile_loglik);
        }
    }

    #[test]
    fn two_sample_profile_dominance(a in 0.2f64..4.0, b in 0.2f64..4.0) {
        let model = two_exponential_model();
        let data = leukemia();
        let fit = fit_mle(&model, &data, None).unwrap();
        let omega = [fit.params[0] * a, fit.params[1] * b];
        let l = log_likelihood(&model, &data, &omega).unwrap();
        for name in ["diff", "ratio", "auc", "kl"] {
            let g = InterestFunction::builtin(name, model.space()).unwrap();
            let psi = g.eval(&omega).unwrap();
            let p = profile_loglik(&model, &data, &g, psi, Some(&fit.params)).unwrap();
            prop_assert!((g.eval(&p.params).unwrap() - psi).abs() <= 1e-8 * psi.abs().max(1.0));
            prop_assert!(p.profile_loglik <= fit.max_loglik + 1e-9);
            prop_assert!(p.profile_loglik >= l - 1e-9, "{name}: {} < {l}", p.profile_loglik);
        }
    }

    #[test]
    fn exact_normal_profile_is_z_interval(ys in prop::collection::vec(-30.0f64..30.0, 2..40),
                                          sigma in 0.1f64..10.0, level in 0.5f64..0.999) {
        let n = ys.len();
        let model = SamplingModel::of(NormalKnownSigmaModel::new(sigma).unwrap(), n).unwrap();
        let data = Dataset::exact(&ys).unwrap();
        let fit = fit_mle(&model, &data, None).unwrap();
        let g = InterestFunction::parse("mu", model.space()).unwrap();
        let ci = profile_interval(&model, &data, &fit, &g, level).unwrap();
        let ybar = ys.iter().sum::<f64>() / n as f64;
        let half = std_normal_quantile(0.5 + level / 2.0).unwrap() * sigma / (n as f64).sqrt();
        prop_assert!((ci.lower - (ybar - half)).abs() <= 1e-9 * ybar.abs().max(1.0));
        prop_assert!((ci.upper - (ybar + half)).abs() <= 1e-9 * ybar.abs().max(1.0));
    }
}

#[test]
fn relative_likelihood_at_endpoints() {
    let expected = (-chisq_quantile(0.95, 1).unwrap() / 2.0).exp();
    assert!((expected - 0.146500).abs() < 1e-6);
    let model = two_exponential_model();
    let data = leukemia();
    let fit = fit_mle(&model, &data, None).unwrap();
    for name in ["m1", "m2", "diff", "ratio", "auc", "kl"] {
        let g = InterestFunction::from_spec(name, model.space()).unwrap();
        let ci = profile_interval(&model, &data, &fit, &g, 0.95).unwrap();
        for end in [ci.lower, ci.upper] {
            let p = profile_loglik(&model, &data, &g, end, Some(&fit.params)).unwrap();
            let r = (p.profile_loglik - fit.max_loglik).exp();
            assert!((r - expected).abs() < 1e-6, "{name} at {end}: {r}");
        }
    }
    let gm = control_gamma_model();
    let c = control();
    let gfit = fit_mle(&gm, &c, None).unwrap();
    let sd = InterestFunction::builtin("gamma_sd", gm.space()).unwrap();
    let ci = profile_interval(&gm, &c, &gfit, &sd, 0.95).unwrap();
    for end in [ci.lower, ci.upper] {
        let p = profile_loglik(&gm, &c, &sd, end, Some(&gfit.params)).unwrap();
        assert!(((p.profile_loglik - gfit.max_loglik).exp() - expected).abs() < 1e-6);
    }
}

#[test]
fn region_image_identity_on_grid() {
    let model = control_gamma_model();
    let data = control();
    let fit = fit_mle(&model, &data, None).unwrap();
    let sd = InterestFunction::builtin("gamma_sd", model.space()).unwrap();
    let cut = cutoff(fit.max_loglik, 0.95).unwrap();

    // image of the likelihood region under g, on a dense log-scale grid
    let k = 700;
    let (s0, s1) = (0.4f64.ln(), 6.0f64.ln());
    let (m0, m1) = (3.0f64.ln(), 25.0f64.ln());
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for i in 0..=k {
        let shape = (s0 + (s1 - s0) * i as f64 / k as f64).exp();
        for j in 0..=k {
            let mean = (m0 + (m1 - m0) * j as f64 / k as f64).exp();
            if log_likelihood(&model, &data, &[shape, mean]).unwrap() >= cut {
                let v = sd.eval(&[shape, mean]).unwrap();
                lo = lo.min(v);
                hi = hi.max(v);
            }
        }
    }
    // region must sit strictly inside the grid box
    let ci = profile_interval(&model, &data, &fit, &sd, 0.95).unwrap();
    assert!(rel(lo, ci.lower) < 5e-3 && rel(hi, ci.upper) < 5e-3, "image [{lo}, {hi}] vs {ci:?}");

    // profile-feasible ψ values coincide with the image away from its edges
    let margin = 0.01 * (hi - lo);
    for t in 0..80 {
        let psi = 2.5 + 12.0 * t as f64 / 79.0;
        if (psi - lo).abs() < margin || (psi - hi).abs() < margin {
            continue;
        }
        let p = profile_loglik(&model, &data, &sd, psi, Some(&fit.params)).unwrap();
        assert_eq!(p.profile_loglik >= cut, (lo..=hi).contains(&psi), "psi {psi}");
    }
}

#[test]
fn profile_curve_invariants() {
    let model = two_exponential_model();
    let data = leukemia();
    let fit = fit_mle(&model, &data, None).unwrap();
    for name in ["ratio", "auc", "kl"] {
        let g = InterestFunction::builtin(name, model.space()).unwrap();
        let tr = profile_curve(&model, &data, &fit, &g, None, 61).unwrap();
        assert!(tr.points.windows(2).all(|w| w[0].psi < w[1].psi));
        assert!(tr.points.iter().all(|p| p.profile_loglik <= fit.max_loglik + 1e-9));
        assert!(tr.points.iter().all(|p| p.inner_converged));
        let best = tr.points.iter().max_by(|a, b| a.profile_loglik.total_cmp(&b.profile_loglik)).unwrap();
        let spacing = tr.points[1].psi - tr.points[0].psi;
        assert!((best.psi - tr.psi_hat).abs() <= spacing, "{name}");
        let at_hat = profile_loglik(&model, &data, &g, tr.psi_hat, Some(&fit.params)).unwrap();
        assert!((at_hat.profile_loglik - fit.max_loglik).abs() < 1e-9);
    }
}

// -------------------------------------------------------------------- expr

const CORPUS: [&str; 20] = [
    "m1",
    "m1 - m2",
    "m1 / m2",
    "m1 / (m1 + m2)",
    "2 - m2/m1 - m1/m2",
    "-m1",
    "--m2",
    "m1 ^ 2 ^ 0.5",
    "(m1 ^ 2) ^ 0.5",
    "-m1 ^ 2",
    "sqrt(m1 * m2)",
    "log(m1) - log(m2)",
    "exp(-m1 / m2)",
    "1.5e-3 * m1 + 2E2",
    "m1 - m2 - 3 - 4",
    "m1 / m2 / 3",
    "(((m1)))",
    "log(m1 / (m1 + m2)) ^ 3",
    "m1 * -m2",
    "0.25 + -0.5 * sqrt(exp(log(m2)))",
];

#[test]
fn printed_trees_reparse_identically() {
    let space = two_exponential_model().space().clone();
    for src in CORPUS {
        let g = InterestFunction::parse(src, &space).unwrap_or_else(|e| panic!("{src}: {e}"));
        let printed = g.ast().to_string();
        let again = InterestFunction::parse(&printed, &space).unwrap_or_else(|e| panic!("{printed}: {e}"));
        assert_eq!(g.ast(), again.ast(), "{src} -> {printed}");
        assert_eq!(again.ast().to_string(), printed);
        let p = [3.7, 1.9];
        assert_eq!(g.eval(&p).unwrap().to_bits(), again.eval(&p).unwrap().to_bits(), "{src}");
    }
}

fn builtin_oracle(name: &str, p: &[f64]) -> Vec<f64> {
    let (a, b) = (p[0], p[1]);
    match name {
        "diff" => vec![1.0, -1.0],
        "ratio" => vec![1.0 / b, -a / (b * b)],
        "auc" => vec![b / ((a + b) * (a + b)), -a / ((a + b) * (a + b))],
        "kl" => vec![b / (a * a) - 1.0 / b, -1.0 / a + a / (b * b)],
        // shape, mean
        "gamma_sd" => vec![-0.5 * b * a.powf(-1.5), 1.0 / a.sqrt()],
        _ => unreachable!(),
    }
}

proptest! {
    #![proptest_config(cfg(100))]

    #[test]
    fn builtin_gradients_match_analytic(a in 0.05f64..100.0, b in 0.05f64..100.0) {
        let two = two_exponential_model().space().clone();
        let gamma = control_gamma_model().space().clone();
        for (name, _) in proflik::expr::BUILTINS {
            let space = if name == "gamma_sd" { &gamma } else { &two };
            let g = InterestFunction::builtin(name, space).unwrap();
            let exact = builtin_oracle(name, &[a, b]);
            let num = g.numeric_gradient(&[a, b]).unwrap();
            let ana = g.analytic_gradient(&[a, b]).unwrap();
            let scale = exact.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            for k in 0..2 {
                prop_assert!((num[k] - exact[k]).abs() <= 1e-5 * exact[k].abs().max(1e-3 * scale), "{name} numeric {k}");
                prop_assert!((ana[k] - exact[k]).abs() <= 1e-10 * scale, "{name} analytic {k}");
            }
        }
    }
}

const TOKENS: [&str; 22] = [
    "m1", "m2", "+", "-", "*", "/", "^", "(", ")", "sqrt", "log", "exp", "1", "2.5", "1e3", "e", ".", ",", " ",
    "x", "1e", "9e999",
];

proptest! {
    #![proptest_config(cfg(2000))]

    #[test]
    fn parser_is_total_on_token_soup(toks in prop::collection::vec(0usize..TOKENS.len(), 0..40)) {
        let space = two_exponential_model().space().clone();
        let src: String = toks.iter().map(|&i| TOKENS[i]).collect();
        if let Ok(g) = InterestFunction::parse(&src, &space) {
            let _ = g.eval(&[2.0, 3.0]);
            let _ = g.analytic_gradient(&[2.0, 3.0]);
            let again = InterestFunction::parse(&g.ast().to_string(), &space).unwrap();
            prop_assert_eq!(g.ast(), again.ast());
        }
    }

    #[test]
    fn parser_is_total_on_arbitrary_text(src in "\\PC{0,60}") {
        let space = two_exponential_model().space().clone();
        let _ = InterestFunction::parse(&src, &space);
    }
}

#[test]
fn parser_rejects_deep_nesting_without_overflow() {
    let space = two_exponential_model().space().clone();
    let deep = format!("{}m1{}", "(".repeat(100_000), ")".repeat(100_000));
    assert!(InterestFunction::parse(&deep, &space).is_err());
    let unary = format!("{}m1", "-".repeat(100_000));
    assert!(InterestFunction::parse(&unary, &space).is_err());
    let open = "(".repeat(100_000);
    assert!(InterestFunction::parse(&open, &space).is_err());
}

// ---------------------------------------------------------------- coverage

fn gamma_scenario(replicates: usize, seed: u64) -> CoverageScenario {
    CoverageScenario {
        family: FamilySpec::Gamma,
        true_params: vec![1.642, 8.667],
        n: 21,
        interest: "gamma_sd".into(),
        level: 0.95,
        replicates,
        seed,
    }
}

#[test]
fn coverage_is_schedule_independent() {
    let s = gamma_scenario(300, 99);
    let one = run_coverage(&s, &[Method::Profile, Method::Delta], 1).unwrap();
    let many = run_coverage(&s, &[Method::Profile, Method::Delta], 4).unwrap();
    assert_eq!(serde_json::to_string(&one).unwrap(), serde_json::to_string(&many).unwrap());
    for m in &one.methods {
        assert!((0.0..=1.0).contains(&m.coverage));
        assert_eq!(m.evaluated + m.failures + one.fit_failures, s.replicates);
    }
}

#[test]
fn exact_normal_coverage_within_five_se() {
    let s = CoverageScenario {
        family: FamilySpec::NormalKnownSigma { sigma: 3.0 },
        true_params: vec![-2.0],
        n: 15,
        interest: "mu".into(),
        level: 0.9,
        replicates: 4000,
        seed: 5,
    };
    let rep = run_coverage(&s, &[Method::Profile, Method::Delta, Method::Wald], 0).unwrap();
    let se = (0.9f64 * 0.1 / 4000.0).sqrt();
    for m in &rep.methods {
        assert!((m.coverage - 0.9).abs() <= 5.0 * se, "{:?}: {}", m.method, m.coverage);
        assert_eq!(m.failures, 0);
    }
    // the three methods coincide exactly here
    assert_eq!(rep.methods[0].covered, rep.methods[1].covered);
    assert_eq!(rep.methods[1].covered, rep.methods[2].covered);
}

// ---------------------------------------------------------------------- io

fn finite_or_inf() -> impl Strategy<Value = f64> {
    prop_oneof![8 => -1e6f64..1e6, 1 => Just(f64::INFINITY), 1 => Just(f64::NEG_INFINITY)]
}

proptest! {
    #![proptest_config(cfg(64))]

    #[test]
    fn result_document_round_trip(rows in prop::collection::vec(
            ("[a-z][a-z0-9_]{0,8}", -1e6f64..1e6, finite_or_inf(), finite_or_inf(), 0usize..3, 0.01f64..0.999,
             prop::collection::vec("[a-z_=0-9.]{1,12}", 0..3)), 0..8)) {
        let methods = [Method::Wald, Method::Delta, Method::Profile];
        let doc = ResultDocument::new(rows.into_iter().map(|(name, estimate, lower, upper, m, level, diagnostics)| {
            ResultRow { name, estimate, lower, upper, method: methods[m], level, diagnostics }
        }).collect());
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.json");
        doc.write(&path).unwrap();
        let back = ResultDocument::read(&path).unwrap();
        prop_assert_eq!(&back, &doc);
        prop_assert_eq!(back.to_json().unwrap(), doc.to_json().unwrap());
    }
}

#[test]
fn bundled_profile_and_arc_models_are_shareable() {
    // models and datasets are shared read-only across threads
    let model = Arc::new(two_exponential_model());
    let data = Arc::new(leukemia());
    let fit = Arc::new(fit_mle(model.as_ref(), &data, None).unwrap());
    let handles: Vec<_> = ["diff", "ratio", "auc", "kl"]
        .into_iter()
        .map(|name| {
            let (model, data, fit) = (model.clone(), data.clone(), fit.clone());
            std::thread::spawn(move || {
                let g = InterestFunction::builtin(name, model.space()).unwrap();
                profile_interval(model.as_ref(), &data, &fit, &g, 0.95).unwrap()
            })
        })
        .collect();
    let threaded: Vec<IntervalResult> = handles.into_iter().map(|h| h.join().unwrap()).collect();
    for (name, t) in ["diff", "ratio", "auc", "kl"].into_iter().zip(threaded) {
        let g = InterestFunction::builtin(name, model.space()).unwrap();
        let s = profile_interval(model.as_ref(), &data, &fit, &g, 0.95).unwrap();
        assert_eq!((s.lower.to_bits(), s.upper.to_bits()), (t.lower.to_bits(), t.upper.to_bits()));
    }
}
