//! `proflik`: fit models, compute Wald, delta and profile likelihood
//! intervals, trace profile curves and run coverage studies.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure.
//! Errors are written to stderr as a single JSON object.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use proflik::{Error, ErrorKind, Method};

mod commands;

#[derive(Debug, Parser)]
#[command(name = "proflik", version, about = "Likelihood-based confidence intervals for interest functions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Maximum likelihood fit; prints estimates and observed information.
    Fit(ModelArgs),
    /// Confidence intervals for interest functions.
    Ci(CiArgs),
    /// Profile log-likelihood on a grid, as CSV.
    ProfileCurve(CurveArgs),
    /// Monte-Carlo coverage of interval methods.
    Coverage(CoverageArgs),
    /// Recomputes the bundled leukemia results and compares them with the reference values.
    Reproduce(ReproduceArgs),
}

#[derive(Debug, Args)]
struct ModelArgs {
    /// Model specification (JSON).
    #[arg(long)]
    model: PathBuf,
    /// Dataset; overrides the path named in the specification.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Output file instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct CiArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// Interest function: a name from the specification, a built-in or an
    /// expression. Repeatable; defaults to every interest in the specification.
    #[arg(long)]
    interest: Vec<String>,
    /// Confidence level; defaults to the specification's.
    #[arg(long)]
    level: Option<f64>,
    /// Interval methods, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "profile", value_parser = parse_method)]
    method: Vec<Method>,
}

#[derive(Debug, Args)]
struct CurveArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// Interest function; defaults to the first one in the specification.
    #[arg(long)]
    interest: Option<String>,
    /// Number of grid points.
    #[arg(long, default_value_t = 101)]
    grid: usize,
    /// Grid range `LO,HI`; by default the 0.999 interval padded by 10%.
    #[arg(long, value_name = "LO,HI", allow_hyphen_values = true, value_parser = parse_range)]
    range: Option<(f64, f64)>,
}

#[derive(Debug, Args)]
struct CoverageArgs {
    /// Scenario file (JSON).
    #[arg(long)]
    scenario: PathBuf,
    #[arg(long)]
    replicates: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; 0 uses every core.
    #[arg(long, default_value_t = 0)]
    workers: usize,
    #[arg(long, value_delimiter = ',', default_value = "profile,delta", value_parser = parse_method)]
    method: Vec<Method>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ReproduceArgs {
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_range(s: &str) -> Result<(f64, f64), String> {
    let bad = || format!("expected LO,HI with LO < HI, got '{s}'");
    let (lo, hi) = s.split_once(',').ok_or_else(bad)?;
    let lo: f64 = lo.trim().parse().map_err(|_| bad())?;
    let hi: f64 = hi.trim().parse().map_err(|_| bad())?;
    if lo.is_finite() && hi.is_finite() && lo < hi {
        Ok((lo, hi))
    } else {
        Err(bad())
    }
}

fn parse_method(s: &str) -> Result<Method, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

/// Failure of a command, tagged with its exit class.
#[derive(Debug)]
pub struct Failure {
    kind: ErrorKind,
    message: String,
}

impl Failure {
    pub fn usage(message: impl Into<String>) -> Self {
        Self { kind: ErrorKind::Usage, message: message.into() }
    }

    pub fn numerical(message: impl Into<String>) -> Self {
        Self { kind: ErrorKind::Numerical, message: message.into() }
    }

    fn exit_code(&self) -> u8 {
        match self.kind {
            ErrorKind::Usage => 1,
            ErrorKind::Data => 2,
            ErrorKind::Numerical => 3,
        }
    }

    fn report(&self) {
        let doc = serde_json::json!({ "error": { "kind": self.kind.to_string(), "message": self.message } });
        eprintln!("{doc}");
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Self { kind: e.kind(), message: e.to_string() }
    }
}

impl From<proflik::expr::ExprError> for Failure {
    fn from(e: proflik::expr::ExprError) -> Self {
        Error::from(e).into()
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let f = Failure::usage(e.render().to_string().trim_end());
            f.report();
            return ExitCode::from(f.exit_code());
        }
    };
    let result = match cli.command {
        Command::Fit(a) => commands::fit(&a),
        Command::Ci(a) => commands::ci(&a),
        Command::ProfileCurve(a) => commands::profile_curve(&a),
        Command::Coverage(a) => commands::coverage(&a),
        Command::Reproduce(a) => commands::reproduce(&a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            f.report();
            ExitCode::from(f.exit_code())
        }
    }
}
