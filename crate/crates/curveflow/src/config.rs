//! Flat `key = value` run configuration.

use std::fmt;
use std::path::{Path, PathBuf};

use curveflow_core::{FlowProblem, Functional, NewtonConfig, TimeStepping};
use serde::Serialize;

use crate::presets::{self, StepDefault};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("line {line}: invalid value {value:?} for `{key}`: {message}")]
    Value {
        line: usize,
        key: String,
        value: String,
        message: String,
    },
    #[error("{0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SchemeKind {
    WillmorePlain,
    WillmoreTv,
    ApwTv,
    HelfrichTv,
}

impl SchemeKind {
    pub const ALL: [SchemeKind; 4] = [
        SchemeKind::WillmorePlain,
        SchemeKind::WillmoreTv,
        SchemeKind::ApwTv,
        SchemeKind::HelfrichTv,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SchemeKind::WillmorePlain => "willmore_plain",
            SchemeKind::WillmoreTv => "willmore_tv",
            SchemeKind::ApwTv => "apw_tv",
            SchemeKind::HelfrichTv => "helfrich_tv",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name() == s)
    }

    pub fn tangential(self) -> bool {
        self != SchemeKind::WillmorePlain
    }
}

impl fmt::Display for SchemeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum InitialCurve {
    Preset(String),
    ControlPoints(PathBuf),
}

/// A validated configuration with all defaults filled in.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub scheme: SchemeKind,
    pub initial: InitialCurve,
    pub n_basis: usize,
    pub degree: usize,
    pub quad_order: usize,
    pub k0: f64,
    pub alpha0: f64,
    pub t_end: f64,
    pub stepping: TimeStepping,
    pub newton: NewtonConfig,
    pub output_dir: PathBuf,
    pub snapshot_stride: usize,
    pub svg: bool,
    pub log_wall_time: bool,
}

impl RunConfig {
    /// The flow problem selected by `scheme`. A positive `k0` adds the
    /// length term to the bending energy.
    pub fn problem(&self) -> curveflow_core::Result<FlowProblem> {
        let elastic = matches!(self.scheme, SchemeKind::WillmorePlain | SchemeKind::WillmoreTv);
        let driving = if elastic || self.k0 != 0.0 {
            Functional::Elastic { k0: self.k0 }
        } else {
            Functional::Bending
        };
        let constraints = match self.scheme {
            SchemeKind::WillmorePlain | SchemeKind::WillmoreTv => vec![],
            SchemeKind::ApwTv => vec![Functional::Area],
            SchemeKind::HelfrichTv => vec![Functional::Area, Functional::Length],
        };
        let alpha0 = self.scheme.tangential().then_some(self.alpha0);
        FlowProblem::new(driving, constraints, alpha0)
    }
}

pub const KEYS: [&str; 20] = [
    "scheme",
    "preset",
    "control_points_file",
    "n",
    "degree",
    "quad_order",
    "k0",
    "alpha0",
    "t_end",
    "tau_cap",
    "uniform_dt",
    "newton_tol",
    "newton_max_iters",
    "newton_fd_step",
    "retry_on_failure",
    "max_retries",
    "output_dir",
    "snapshot_stride",
    "svg",
    "log_wall_time",
];

/// Raw entries in file order, each with its line number.
#[derive(Debug, Default)]
struct Entries(Vec<(usize, String, String)>);

impl Entries {
    fn get(&self, key: &str) -> Option<(usize, &str)> {
        self.0
            .iter()
            .find(|(_, k, _)| k == key)
            .map(|(l, _, v)| (*l, v.as_str()))
    }

    fn parsed<T>(&self, key: &str) -> Result<Option<T>, ConfigError>
    where
        T: std::str::FromStr,
        T::Err: fmt::Display,
    {
        match self.get(key) {
            None => Ok(None),
            Some((line, raw)) => raw.parse::<T>().map(Some).map_err(|e| ConfigError::Value {
                line,
                key: key.to_string(),
                value: raw.to_string(),
                message: e.to_string(),
            }),
        }
    }
}

pub fn parse_config(path: &Path) -> Result<RunConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let base = path.parent().unwrap_or(Path::new("."));
    parse_str(&text, base)
}

/// Parses configuration text; relative paths are resolved against `base`.
pub fn parse_str(text: &str, base: &Path) -> Result<RunConfig, ConfigError> {
    let mut entries = Entries::default();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (key, value) = content.split_once('=').ok_or_else(|| ConfigError::Syntax {
            line,
            message: format!("expected `key = value`, got {content:?}"),
        })?;
        let (key, value) = (key.trim(), value.trim());
        if !KEYS.contains(&key) {
            return Err(ConfigError::Syntax {
                line,
                message: format!("unknown key `{key}`"),
            });
        }
        if value.is_empty() {
            return Err(ConfigError::Syntax {
                line,
                message: format!("missing value for `{key}`"),
            });
        }
        if let Some((first, _)) = entries.get(key) {
            return Err(ConfigError::Syntax {
                line,
                message: format!("duplicate key `{key}` (first set on line {first})"),
            });
        }
        entries.0.push((line, key.to_string(), value.to_string()));
    }
    build(&entries, base)
}

fn build(e: &Entries, base: &Path) -> Result<RunConfig, ConfigError> {
    let preset = match e.get("preset") {
        None => None,
        Some((line, name)) => Some(presets::find(name).ok_or_else(|| ConfigError::Value {
            line,
            key: "preset".into(),
            value: name.into(),
            message: "unknown preset".into(),
        })?),
    };
    let initial = match (preset, e.get("control_points_file")) {
        (Some(p), None) => InitialCurve::Preset(p.name.to_string()),
        (None, Some((_, file))) => InitialCurve::ControlPoints(base.join(file)),
        (Some(_), Some(_)) => {
            return Err(ConfigError::Invalid(
                "set only one of `preset` and `control_points_file`".into(),
            ))
        }
        (None, None) => {
            return Err(ConfigError::Invalid(
                "an initial curve is required: set `preset` or `control_points_file`".into(),
            ))
        }
    };

    let scheme = match e.get("scheme") {
        Some((line, s)) => SchemeKind::parse(s).ok_or_else(|| ConfigError::Value {
            line,
            key: "scheme".into(),
            value: s.into(),
            message: "expected willmore_plain, willmore_tv, apw_tv or helfrich_tv".into(),
        })?,
        None => preset
            .map(|p| p.scheme)
            .ok_or_else(|| ConfigError::Invalid("`scheme` is required without a preset".into()))?,
    };

    let required = |key: &str, fallback: Option<f64>| -> Result<f64, ConfigError> {
        e.parsed::<f64>(key)?
            .or(fallback)
            .ok_or_else(|| ConfigError::Invalid(format!("`{key}` is required without a preset")))
    };
    let n_basis = match e.parsed::<usize>("n")? {
        Some(n) => n,
        None => preset
            .map(|p| p.n_basis)
            .ok_or_else(|| ConfigError::Invalid("`n` is required without a preset".into()))?,
    };
    let degree = e.parsed::<usize>("degree")?.or(preset.map(|p| p.degree)).unwrap_or(3);
    let quad_order = e.parsed::<usize>("quad_order")?.unwrap_or(degree + 2);
    let k0 = e.parsed::<f64>("k0")?.or(preset.map(|p| p.k0)).unwrap_or(0.0);
    let alpha0 = e
        .parsed::<f64>("alpha0")?
        .or(preset.map(|p| p.alpha0))
        .unwrap_or(if scheme.tangential() { 1.0 } else { 0.0 });
    let t_end = required("t_end", preset.map(|p| p.t_end))?;

    let stepping = match (e.parsed::<f64>("tau_cap")?, e.parsed::<f64>("uniform_dt")?) {
        (Some(_), Some(_)) => {
            return Err(ConfigError::Invalid(
                "set exactly one of `tau_cap` and `uniform_dt`".into(),
            ))
        }
        (Some(tau_cap), None) => TimeStepping::Adaptive { tau_cap },
        (None, Some(dt)) => TimeStepping::Uniform { dt },
        (None, None) => match preset.map(|p| p.stepping) {
            Some(StepDefault::AdaptiveCap(tau_cap)) => TimeStepping::Adaptive { tau_cap },
            Some(StepDefault::AdaptiveFraction(d)) => TimeStepping::Adaptive { tau_cap: t_end / d },
            Some(StepDefault::UniformFraction(d)) => TimeStepping::Uniform { dt: t_end / d },
            None => {
                return Err(ConfigError::Invalid(
                    "set exactly one of `tau_cap` and `uniform_dt`".into(),
                ))
            }
        },
    };

    let defaults = NewtonConfig::default();
    let newton = NewtonConfig {
        residual_tol: e.parsed("newton_tol")?.unwrap_or(defaults.residual_tol),
        max_iters: e.parsed("newton_max_iters")?.unwrap_or(defaults.max_iters),
        jacobian_fd_step: e.parsed("newton_fd_step")?.unwrap_or(defaults.jacobian_fd_step),
        retry_on_failure: e.parsed("retry_on_failure")?.unwrap_or(defaults.retry_on_failure),
        max_retries: e.parsed("max_retries")?.unwrap_or(defaults.max_retries),
    };

    let output_dir = base.join(e.get("output_dir").map(|(_, v)| v).unwrap_or("out"));
    let cfg = RunConfig {
        scheme,
        initial,
        n_basis,
        degree,
        quad_order,
        k0,
        alpha0,
        t_end,
        stepping,
        newton,
        output_dir,
        snapshot_stride: e.parsed("snapshot_stride")?.unwrap_or(100),
        svg: e.parsed("svg")?.unwrap_or(false),
        log_wall_time: e.parsed("log_wall_time")?.unwrap_or(false),
    };
    validate(&cfg)?;
    Ok(cfg)
}

fn validate(cfg: &RunConfig) -> Result<(), ConfigError> {
    let fail = |m: String| Err(ConfigError::Invalid(m));
    if cfg.degree < 2 {
        return fail(format!("degree must be at least 2, got {}", cfg.degree));
    }
    if cfg.n_basis < 2 * cfg.degree + 1 {
        return fail(format!(
            "n must be at least 2 * degree + 1 = {}, got {}",
            2 * cfg.degree + 1,
            cfg.n_basis
        ));
    }
    if cfg.quad_order < cfg.degree + 2 {
        return fail(format!(
            "quad_order must be at least degree + 2 = {}, got {}",
            cfg.degree + 2,
            cfg.quad_order
        ));
    }
    if !(cfg.t_end > 0.0 && cfg.t_end.is_finite()) {
        return fail(format!("t_end must be positive, got {}", cfg.t_end));
    }
    let step = match cfg.stepping {
        TimeStepping::Adaptive { tau_cap } => tau_cap,
        TimeStepping::Uniform { dt } => dt,
    };
    if !(step > 0.0 && step.is_finite()) {
        return fail(format!("time increment must be positive, got {step}"));
    }
    if !(cfg.k0 >= 0.0 && cfg.k0.is_finite()) {
        return fail(format!("k0 must be >= 0, got {}", cfg.k0));
    }
    if !(cfg.alpha0 >= 0.0 && cfg.alpha0.is_finite()) {
        return fail(format!("alpha0 must be >= 0, got {}", cfg.alpha0));
    }
    if cfg.snapshot_stride == 0 {
        return fail("snapshot_stride must be positive".into());
    }
    cfg.newton
        .validate()
        .map_err(|e| ConfigError::Invalid(e.to_string()))
}
