//! Run configuration from a `key = value` file and command-line overrides.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::PathBuf;

use sldg_core::driver::{DiagCadence, SimConfig};

use crate::problems::problem_library;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum UsageError {
    #[error("line {line}: expected 'key = value', got '{text}'")]
    Syntax { line: usize, text: String },
    #[error("unknown key '{0}'")]
    UnknownKey(String),
    #[error("invalid value '{value}' for {key}: {reason}")]
    Value { key: String, value: String, reason: String },
    #[error("{0}")]
    Invalid(String),
}

pub const KEYS: [&str; 15] = [
    "problem",
    "nx",
    "nv",
    "degree",
    "qc",
    "time-order",
    "efficient",
    "cfl",
    "tmax",
    "pp-limiter",
    "reverse-at",
    "snapshot-times",
    "diag-every",
    "out",
    "fit-rates",
];

/// Unresolved settings: one string per key.
pub type Settings = BTreeMap<String, String>;

fn normalize(key: &str) -> String {
    key.trim().to_ascii_lowercase().replace('_', "-")
}

/// Parses `key = value` lines; `#` starts a comment.
pub fn parse_settings(text: &str) -> Result<Settings, UsageError> {
    let mut out = Settings::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| UsageError::Syntax {
            line: n + 1,
            text: raw.to_string(),
        })?;
        let k = normalize(k);
        if !KEYS.contains(&k.as_str()) {
            return Err(UsageError::UnknownKey(k));
        }
        out.insert(k, v.trim().to_string());
    }
    Ok(out)
}

/// Resolved configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub sim: SimConfig,
    pub out: PathBuf,
    pub fit_rates: bool,
}

fn value<T: std::str::FromStr>(s: &Settings, key: &str) -> Result<Option<T>, UsageError>
where
    T::Err: std::fmt::Display,
{
    match s.get(key) {
        None => Ok(None),
        Some(v) => v.parse::<T>().map(Some).map_err(|e| UsageError::Value {
            key: key.into(),
            value: v.clone(),
            reason: e.to_string(),
        }),
    }
}

fn flag(s: &Settings, key: &str) -> Result<Option<bool>, UsageError> {
    match s.get(key).map(|v| v.to_ascii_lowercase()) {
        None => Ok(None),
        Some(v) => match v.as_str() {
            "on" | "true" | "yes" | "1" => Ok(Some(true)),
            "off" | "false" | "no" | "0" => Ok(Some(false)),
            _ => Err(UsageError::Value {
                key: key.into(),
                value: v,
                reason: "expected on or off".into(),
            }),
        },
    }
}

fn list(s: &Settings, key: &str) -> Result<Option<Vec<f64>>, UsageError> {
    let Some(v) = s.get(key) else {
        return Ok(None);
    };
    v.split(|c: char| c == ',' || c.is_whitespace())
        .filter(|t| !t.is_empty())
        .map(|t| {
            t.parse::<f64>().map_err(|e| UsageError::Value {
                key: key.into(),
                value: v.clone(),
                reason: e.to_string(),
            })
        })
        .collect::<Result<Vec<_>, _>>()
        .map(Some)
}

/// Applies `settings` on top of the defaults and validates the result.
pub fn resolve(settings: &Settings) -> Result<RunConfig, UsageError> {
    let mut sim = SimConfig::default();
    let mut out = PathBuf::from("out");
    let mut fit_rates = false;
    if let Some(p) = settings.get("problem") {
        let spec = problem_library(p).map_err(|e| UsageError::Invalid(e.to_string()))?;
        sim.problem = spec.id.to_string();
        sim.field = spec.field;
    }
    if let Some(n) = value(settings, "nx")? {
        sim.nx = n;
    }
    if let Some(n) = value(settings, "nv")? {
        sim.nv = n;
    }
    if let Some(k) = value(settings, "degree")? {
        sim.degree = k;
    }
    if let Some(b) = flag(settings, "qc")? {
        sim.qc = b;
    }
    if let Some(o) = value(settings, "time-order")? {
        sim.time_order = o;
    }
    if let Some(b) = flag(settings, "efficient")? {
        sim.efficient = b;
    }
    if let Some(c) = value(settings, "cfl")? {
        sim.cfl = c;
    }
    if let Some(t) = value(settings, "tmax")? {
        sim.t_max = t;
    }
    if let Some(b) = flag(settings, "pp-limiter")? {
        sim.pp_limiter = b;
    }
    if let Some(t) = settings.get("reverse-at") {
        sim.reverse_at = if t.eq_ignore_ascii_case("none") {
            None
        } else {
            value(settings, "reverse-at")?
        };
    }
    if let Some(ts) = list(settings, "snapshot-times")? {
        sim.snapshot_times = ts;
    }
    if let Some(d) = settings.get("diag-every") {
        sim.diag = if d.eq_ignore_ascii_case("default") {
            DiagCadence::Default
        } else {
            DiagCadence::Every(value(settings, "diag-every")?.expect("present"))
        };
    }
    if let Some(o) = settings.get("out") {
        out = PathBuf::from(o);
    }
    if let Some(b) = flag(settings, "fit-rates")? {
        fit_rates = b;
    }
    sim.validate().map_err(|e| UsageError::Invalid(e.to_string()))?;
    Ok(RunConfig { sim, out, fit_rates })
}

fn on_off(b: bool) -> &'static str {
    if b {
        "on"
    } else {
        "off"
    }
}

/// `key = value` text that `parse_settings` + `resolve` map back to `cfg`.
pub fn echo(cfg: &RunConfig) -> String {
    let s = &cfg.sim;
    let mut t = String::new();
    let _ = writeln!(t, "# {}", s.label());
    let mut kv = |k: &str, v: String| {
        let _ = writeln!(t, "{k} = {v}");
    };
    kv("problem", s.problem.clone());
    kv("nx", s.nx.to_string());
    kv("nv", s.nv.to_string());
    kv("degree", s.degree.to_string());
    kv("qc", on_off(s.qc).into());
    kv("time-order", s.time_order.to_string());
    kv("efficient", on_off(s.efficient).into());
    kv("cfl", format!("{:?}", s.cfl));
    kv("tmax", format!("{:?}", s.t_max));
    kv("pp-limiter", on_off(s.pp_limiter).into());
    kv(
        "reverse-at",
        s.reverse_at.map_or_else(|| "none".to_string(), |t| format!("{t:?}")),
    );
    kv(
        "snapshot-times",
        s.snapshot_times
            .iter()
            .map(|t| format!("{t:?}"))
            .collect::<Vec<_>>()
            .join(","),
    );
    kv(
        "diag-every",
        match s.diag {
            DiagCadence::Default => "default".into(),
            DiagCadence::Every(h) => format!("{h:?}"),
        },
    );
    kv("out", cfg.out.display().to_string());
    kv("fit-rates", on_off(cfg.fit_rates).into());
    t
}
