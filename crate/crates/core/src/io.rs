//! Dataset files, model specification files and result documents.
//!
//! Datasets are comma-separated with a header naming `time` and optionally
//! `status` (1 = event, 0 = right censored) and a grouping column. A
//! single-column variant writes censored times with a trailing `+`
//! (`6+`). Lines starting with `#` are comments.
//!
//! Specifications and results are JSON documents carrying a `version` field.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::catalog::{FamilySpec, IndependenceModel, SamplingModel};
use crate::error::{Error, Result};
use crate::estimation::FitResult;
use crate::expr::InterestFunction;
use crate::interval::{IntervalResult, Method};
use crate::model::{Dataset, Model, Observation};

pub const FORMAT_VERSION: u32 = 1;

fn io_error(path: &Path, source: std::io::Error) -> Error {
    Error::Io { path: path.display().to_string(), source }
}

pub fn read_dataset(path: impl AsRef<Path>) -> Result<Dataset> {
    read_dataset_with(path, "group")
}

/// Reads a dataset, taking group labels from `group_column` when present.
pub fn read_dataset_with(path: impl AsRef<Path>, group_column: &str) -> Result<Dataset> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| io_error(path, e))?;
    parse_dataset(&text, Some(group_column)).map_err(|e| match e {
        Error::Data(msg) => Error::Data(format!("{}: {msg}", path.display())),
        other => other,
    })
}

fn parse_time(field: &str, line: usize) -> Result<f64> {
    let v: f64 = field
        .parse()
        .map_err(|_| Error::Data(format!("line {line}: '{field}' is not a number")))?;
    if !v.is_finite() || v < 0.0 {
        return Err(Error::Data(format!("line {line}: time must be finite and non-negative, got {field}")));
    }
    Ok(v)
}

/// A time with an optional trailing `+` for right censoring.
fn parse_suffixed(field: &str, line: usize) -> Result<Observation> {
    match field.strip_suffix('+') {
        Some(t) => Ok(Observation::censored(parse_time(t.trim(), line)?)),
        None => Ok(Observation::exact(parse_time(field, line)?)),
    }
}

/// Parses dataset text. `group_column` names the grouping column; a header
/// without it yields an ungrouped dataset.
pub fn parse_dataset(text: &str, group_column: Option<&str>) -> Result<Dataset> {
    let first = text
        .lines()
        .map(str::trim)
        .find(|l| !l.is_empty() && !l.starts_with('#'))
        .ok_or_else(|| Error::Data("dataset is empty".into()))?;
    let has_header = first.split(',').any(|f| f.trim().chars().next().is_some_and(|c| c.is_ascii_alphabetic()));

    let mut reader = csv::ReaderBuilder::new()
        .has_headers(has_header)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .flexible(false)
        .from_reader(text.as_bytes());

    let (time_col, status_col, group_col) = if has_header {
        let headers = reader.headers().map_err(|e| Error::Data(format!("header: {e}")))?.clone();
        let find = |name: &str| headers.iter().position(|h| h.eq_ignore_ascii_case(name));
        let time = find("time").ok_or_else(|| {
            Error::Data(format!("header must contain a 'time' column, found {:?}", headers.iter().collect::<Vec<_>>()))
        })?;
        let group = match group_column {
            Some(g) => find(g),
            None => None,
        };
        (time, find("status"), group)
    } else {
        (0, None, None)
    };

    let mut obs = Vec::new();
    let mut groups = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map(|p| p.line()).unwrap_or(0);
            Error::Data(format!("line {line}: malformed row ({e})"))
        })?;
        let line = record.position().map(|p| p.line() as usize).unwrap_or(0);
        let field = |i: usize| record.get(i).unwrap_or("");
        let o = match status_col {
            Some(s) => {
                let value = parse_time(field(time_col), line)?;
                match field(s) {
                    "1" => Observation::exact(value),
                    "0" => Observation::censored(value),
                    other => {
                        return Err(Error::Data(format!(
                            "line {line}: unknown status code '{other}' (expected 1 = event or 0 = censored)"
                        )))
                    }
                }
            }
            None => parse_suffixed(field(time_col), line)?,
        };
        obs.push(o);
        if let Some(g) = group_col {
            let label = field(g);
            if label.is_empty() {
                return Err(Error::Data(format!("line {line}: empty group label")));
            }
            groups.push(label.to_string());
        }
    }
    if obs.is_empty() {
        return Err(Error::Data("dataset has no observations".into()));
    }
    if group_col.is_some() {
        Dataset::with_groups(obs, groups)
    } else {
        Dataset::new(obs)
    }
}

/// One model component, bound to a group of the dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub group: Option<String>,
    #[serde(flatten)]
    pub family: FamilySpec,
    /// Parameter names; the family's defaults when omitted.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parameters: Option<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedInterest {
    pub name: String,
    /// An expression over parameter names or a built-in name.
    pub expr: String,
}

fn default_level() -> f64 {
    0.95
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpecFile {
    pub version: u32,
    /// Dataset path, relative to the specification file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dataset: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub group_column: Option<String>,
    pub groups: Vec<GroupSpec>,
    #[serde(default)]
    pub interests: Vec<NamedInterest>,
    #[serde(default = "default_level")]
    pub level: f64,
}

impl ModelSpecFile {
    pub fn parse(text: &str) -> Result<Self> {
        let spec: Self = serde_json::from_str(text).map_err(|e| Error::Spec(format!("model specification: {e}")))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| io_error(path, e))?;
        Self::parse(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.version != FORMAT_VERSION {
            return Err(Error::Spec(format!(
                "unsupported specification version {} (expected {FORMAT_VERSION})",
                self.version
            )));
        }
        if !(self.level > 0.0 && self.level < 1.0) {
            return Err(Error::Spec(format!("level must lie in (0, 1), got {}", self.level)));
        }
        if self.groups.is_empty() {
            return Err(Error::Spec("at least one model component is required".into()));
        }
        match &self.group_column {
            None if self.groups.len() > 1 => {
                Err(Error::Spec("several components need a group_column to tell the groups apart".into()))
            }
            Some(_) if self.groups.iter().any(|g| g.group.is_none()) => {
                Err(Error::Spec("every component needs a 'group' label when group_column is set".into()))
            }
            _ => Ok(()),
        }
    }

    /// Dataset path resolved against the directory holding `spec_path`.
    pub fn dataset_path(&self, spec_path: &Path) -> Option<PathBuf> {
        self.dataset.as_ref().map(|d| {
            let p = Path::new(d);
            if p.is_absolute() {
                p.to_path_buf()
            } else {
                spec_path.parent().unwrap_or(Path::new(".")).join(p)
            }
        })
    }

    pub fn read_data(&self, path: &Path) -> Result<Dataset> {
        let data = read_dataset_with(path, self.group_column.as_deref().unwrap_or("group"))?;
        if let Some(col) = &self.group_column {
            if data.groups().is_none() {
                return Err(Error::Data(format!("{}: no column named '{col}'", path.display())));
            }
        }
        Ok(data)
    }

    /// Builds the (possibly product) model matching `data`.
    pub fn build_model(&self, data: &Dataset) -> Result<Box<dyn Model>> {
        self.validate()?;
        if self.group_column.is_none() {
            let g = &self.groups[0];
            let family = g.family.build(g.parameters.as_deref())?;
            return Ok(Box::new(SamplingModel::new(family, data.len())?));
        }
        let mut components: Vec<(String, Box<dyn Model>)> = Vec::new();
        for g in &self.groups {
            let label = g.group.clone().expect("validated");
            let n = data.group(&label)?.len();
            let family = g.family.build(g.parameters.as_deref())?;
            components.push((label, Box::new(SamplingModel::new(family, n)?)));
        }
        Ok(Box::new(IndependenceModel::new(components)?))
    }

    pub fn interest_functions(&self, model: &dyn Model) -> Result<Vec<(String, InterestFunction)>> {
        self.interests
            .iter()
            .map(|i| Ok((i.name.clone(), InterestFunction::from_spec(&i.expr, model.space())?)))
            .collect()
    }
}

/// One row of a result table: a target, its estimate and interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub name: String,
    pub estimate: f64,
    #[serde(with = "crate::serde_real")]
    pub lower: f64,
    #[serde(with = "crate::serde_real")]
    pub upper: f64,
    pub method: Method,
    pub level: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub diagnostics: Vec<String>,
}

impl ResultRow {
    pub fn from_interval(name: &str, r: &IntervalResult) -> Self {
        let mut diagnostics: Vec<String> = r
            .flags
            .iter()
            .map(|f| serde_json::to_value(f).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default())
            .collect();
        if let Some(se) = r.standard_error {
            diagnostics.push(format!("standard_error={se}"));
        }
        Self {
            name: name.to_string(),
            estimate: r.estimate,
            lower: r.lower,
            upper: r.upper,
            method: r.method,
            level: r.level,
            diagnostics,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultDocument {
    pub version: u32,
    pub rows: Vec<ResultRow>,
}

impl ResultDocument {
    pub fn new(rows: Vec<ResultRow>) -> Self {
        Self { version: FORMAT_VERSION, rows }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: Self = serde_json::from_str(text)?;
        if doc.version != FORMAT_VERSION {
            return Err(Error::Spec(format!("unsupported result version {}", doc.version)));
        }
        Ok(doc)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_json()? + "\n").map_err(|e| io_error(path, e))
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        Self::from_json(&fs::read_to_string(path).map_err(|e| io_error(path, e))?)
    }
}

/// Serializable view of a [`FitResult`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitDocument {
    pub version: u32,
    pub names: Vec<String>,
    pub estimate: Vec<f64>,
    pub max_loglik: f64,
    pub observed_info: Vec<Vec<f64>>,
    pub converged: bool,
    pub iterations: usize,
    pub init_used: Vec<f64>,
}

impl From<&FitResult> for FitDocument {
    fn from(f: &FitResult) -> Self {
        let d = f.params.len();
        Self {
            version: FORMAT_VERSION,
            names: f.names.clone(),
            estimate: f.params.clone(),
            max_loglik: f.max_loglik,
            observed_info: (0..d).map(|i| (0..d).map(|j| f.observed_info[(i, j)]).collect()).collect(),
            converged: f.converged,
            iterations: f.iterations,
            init_used: f.init_used.clone(),
        }
    }
}
