use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use proflik::io::FitDocument;
use proflik::profile::profile_curve as trace_profile;
use proflik::reproduce::{reproduce as run_reproduction, Check};
use serde::Serialize;
use proflik::{
    delta_interval, fit_mle, profile_interval, run_coverage, wald_interval, CoverageScenario, Dataset, Error,
    FitResult, InterestFn, InterestFunction, Method, Model, ModelSpecFile, ResultDocument, ResultRow,
};

use crate::{CiArgs, CoverageArgs, CurveArgs, Failure, ModelArgs, ReproduceArgs};

type CmdResult = Result<(), Failure>;

fn emit(out: Option<&Path>, text: &str) -> CmdResult {
    match out {
        Some(path) => fs::write(path, text)
            .map_err(|source| Error::Io { path: path.display().to_string(), source }.into()),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(text.as_bytes())
                .and_then(|_| stdout.flush())
                .map_err(|source| Error::Io { path: "stdout".into(), source }.into())
        }
    }
}

fn json<T: Serialize>(value: &T) -> Result<String, Failure> {
    let mut s = serde_json::to_string_pretty(value).map_err(Error::from)?;
    s.push('\n');
    Ok(s)
}

struct Loaded {
    spec: ModelSpecFile,
    data: Dataset,
    model: Box<dyn Model>,
}

fn load(args: &ModelArgs) -> Result<Loaded, Failure> {
    let spec = ModelSpecFile::load(&args.model)?;
    let path: PathBuf = match (&args.data, spec.dataset_path(&args.model)) {
        (Some(p), _) => p.clone(),
        (None, Some(p)) => p,
        (None, None) => return Err(Failure::usage("no dataset: pass --data or name one in the specification")),
    };
    let data = spec.read_data(&path)?;
    let model = spec.build_model(&data)?;
    Ok(Loaded { spec, data, model })
}

fn fit_of(l: &Loaded) -> Result<FitResult, Failure> {
    let fit = fit_mle(l.model.as_ref(), &l.data, None)?;
    if !fit.converged {
        return Err(Failure::numerical(format!(
            "maximum likelihood fit did not converge after {} iterations",
            fit.iterations
        )));
    }
    Ok(fit)
}

/// Resolves `text` as a named interest of the specification, a built-in or
/// an expression, in that order.
fn interest(l: &Loaded, text: &str) -> Result<(String, InterestFunction), Failure> {
    if let Some(named) = l.spec.interests.iter().find(|i| i.name == text) {
        return Ok((named.name.clone(), InterestFunction::from_spec(&named.expr, l.model.space())?));
    }
    Ok((text.to_string(), InterestFunction::from_spec(text, l.model.space())?))
}

pub fn fit(args: &ModelArgs) -> CmdResult {
    let l = load(args)?;
    let fit = fit_of(&l)?;
    emit(args.out.as_deref(), &json(&FitDocument::from(&fit))?)
}

pub fn ci(args: &CiArgs) -> CmdResult {
    let l = load(&args.model)?;
    let level = args.level.unwrap_or(l.spec.level);
    if !(level > 0.0 && level < 1.0) {
        return Err(Failure::usage(format!("--level must lie in (0, 1), got {level}")));
    }
    let targets: Vec<(String, InterestFunction)> = if args.interest.is_empty() {
        if l.spec.interests.is_empty() {
            return Err(Failure::usage("no interest functions: pass --interest or list them in the specification"));
        }
        l.spec.interest_functions(l.model.as_ref())?
    } else {
        args.interest.iter().map(|t| interest(&l, t)).collect::<Result<_, _>>()?
    };
    let fit = fit_of(&l)?;
    let mut rows = Vec::new();
    for (name, g) in &targets {
        for method in &args.method {
            let iv = match method {
                Method::Profile => profile_interval(l.model.as_ref(), &l.data, &fit, g, level)?,
                Method::Delta => delta_interval(&fit, g, level)?,
                Method::Wald => {
                    let k = g.coordinate().ok_or_else(|| {
                        Failure::usage(format!("wald intervals need a single parameter; '{name}' is not one"))
                    })?;
                    wald_interval(&fit, k, level)?
                }
            };
            rows.push(ResultRow::from_interval(name, &iv));
        }
    }
    emit(args.model.out.as_deref(), &json(&ResultDocument::new(rows))?)
}

pub fn profile_curve(args: &CurveArgs) -> CmdResult {
    let l = load(&args.model)?;
    let (_, g) = match &args.interest {
        Some(t) => interest(&l, t)?,
        None => {
            let first = l
                .spec
                .interests
                .first()
                .ok_or_else(|| Failure::usage("no interest function: pass --interest"))?;
            interest(&l, &first.name)?
        }
    };
    if args.grid < 2 {
        return Err(Failure::usage(format!("--grid needs at least 2 points, got {}", args.grid)));
    }
    let fit = fit_of(&l)?;
    let trace = trace_profile(l.model.as_ref(), &l.data, &fit, &g, args.range, args.grid)?;
    emit(args.model.out.as_deref(), &trace.to_csv_string())
}

pub fn coverage(args: &CoverageArgs) -> CmdResult {
    let text = fs::read_to_string(&args.scenario)
        .map_err(|source| Error::Io { path: args.scenario.display().to_string(), source })?;
    let mut scenario: CoverageScenario =
        serde_json::from_str(&text).map_err(|e| Error::Spec(format!("coverage scenario: {e}")))?;
    if let Some(r) = args.replicates {
        scenario.replicates = r;
    }
    if let Some(s) = args.seed {
        scenario.seed = s;
    }
    let report = run_coverage(&scenario, &args.method, args.workers)?;
    eprintln!("{}", report.summary());
    emit(args.out.as_deref(), &json(&report)?)
}

#[derive(Serialize)]
struct ReproduceDocument<'a> {
    version: u32,
    all_pass: bool,
    rows: &'a [ResultRow],
    checks: &'a [Check],
}

pub fn reproduce(args: &ReproduceArgs) -> CmdResult {
    let r = run_reproduction()?;
    for c in &r.checks {
        eprintln!(
            "{} {:<24} computed {:>10.4}  reference {:>10.3}",
            if c.pass { "ok  " } else { "FAIL" },
            c.name,
            c.computed,
            c.expected
        );
    }
    let doc = ReproduceDocument {
        version: proflik::io::FORMAT_VERSION,
        all_pass: r.all_pass(),
        rows: &r.document.rows,
        checks: &r.checks,
    };
    emit(args.out.as_deref(), &json(&doc)?)?;
    if r.all_pass() {
        Ok(())
    } else {
        let failed: Vec<&str> = r.checks.iter().filter(|c| !c.pass).map(|c| c.name.as_str()).collect();
        Err(Failure::numerical(format!("reference values not reproduced: {}", failed.join(", "))))
    }
}
