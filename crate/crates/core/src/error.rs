use std::fmt;

use thiserror::Error;

use crate::expr::ExprError;

/// Failures raised by the numerical building blocks.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum NumericsError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("non-finite function value at {at:?}")]
    NonFinite { at: Vec<f64> },
    #[error("bracket [{lo}, {hi}] does not contain a sign change (f = {f_lo}, {f_hi})")]
    NoSignChange { lo: f64, hi: f64, f_lo: f64, f_hi: f64 },
    #[error("no convergence after {iterations} iterations (best value {value} at {best:?})")]
    NotConverged { iterations: usize, best: Vec<f64>, value: f64 },
    #[error("matrix is singular or ill-conditioned (condition number {condition:e})")]
    Singular { condition: f64 },
}

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error(transparent)]
    Expr(#[from] ExprError),
    #[error("parameter domain error: {0}")]
    ParameterDomain(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("model specification error: {0}")]
    Spec(String),
    #[error("likelihood is unbounded: {0}")]
    UnboundedLikelihood(String),
    #[error("interest value {psi} is infeasible: {reason}")]
    Infeasible { psi: f64, reason: String },
    #[error("likelihood region is unbounded: {0}")]
    UnboundedRegion(String),
    #[error("too many failed replicates: {failed} of {total}")]
    Study { failed: usize, total: usize },
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("serialization error: {0}")]
    Serde(#[from] serde_json::Error),
}

/// Coarse classification used by the command-line front end to pick exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Data,
    Numerical,
    Usage,
}

impl fmt::Display for ErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ErrorKind::Data => "data",
            ErrorKind::Numerical => "numerical",
            ErrorKind::Usage => "usage",
        })
    }
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Data(_) | Error::Io { .. } | Error::Serde(_) | Error::Spec(_) => ErrorKind::Data,
            Error::Expr(e) if e.is_usage() => ErrorKind::Usage,
            _ => ErrorKind::Numerical,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
