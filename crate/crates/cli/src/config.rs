//! Run configuration: flat `key=value` files plus command-line overrides.

use std::collections::BTreeMap;
use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("{path}:{line}: expected key=value, got {text:?}")]
    Syntax { path: String, line: usize, text: String },
    #[error("unknown key {0:?}")]
    UnknownKey(String),
    #[error("bad value for {key}: {value:?} ({reason})")]
    BadValue { key: String, value: String, reason: String },
    #[error("missing {0}")]
    Missing(&'static str),
}

pub const KEYS: &[&str] = &[
    "problem",
    "theta",
    "max_dof",
    "max_levels",
    "out",
    "mesh",
    "mu",
    "chi",
    "young",
    "poisson",
    "force",
    "dirichlet",
    "gap",
    "eta5",
    "test_mode",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProblemId {
    Example61,
    Example62,
    Custom,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MaterialOverride {
    Lame { mu: f64, chi: f64 },
    Engineering { young: f64, poisson: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub problem: ProblemId,
    pub theta: f64,
    pub max_dof: usize,
    pub max_levels: usize,
    pub out: PathBuf,
    pub mesh: Option<PathBuf>,
    pub material: Option<MaterialOverride>,
    /// Constant body force of the custom problem.
    pub force: [f64; 2],
    /// Constant Dirichlet data of the custom problem.
    pub dirichlet: [f64; 2],
    /// Constant obstacle of the custom problem.
    pub gap: f64,
    pub raw_contact_residual: bool,
    pub test_mode: bool,
}

/// Parses `key=value` lines; blank lines and `#` comments are skipped.
pub fn parse_pairs(text: &str, path: &str) -> Result<Vec<(String, String)>, ConfigError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(ConfigError::Syntax { path: path.to_string(), line: i + 1, text: raw.to_string() });
        };
        out.push((k.trim().to_string(), v.trim().to_string()));
    }
    Ok(out)
}

fn bad(key: &str, value: &str, reason: impl Into<String>) -> ConfigError {
    ConfigError::BadValue { key: key.to_string(), value: value.to_string(), reason: reason.into() }
}

fn num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T, ConfigError>
where
    T::Err: std::fmt::Display,
{
    v.parse::<T>().map_err(|e| bad(key, v, e.to_string()))
}

fn pair(key: &str, v: &str) -> Result<[f64; 2], ConfigError> {
    let parts: Vec<&str> = v.split(',').map(str::trim).collect();
    if parts.len() != 2 {
        return Err(bad(key, v, "expected two comma-separated numbers"));
    }
    Ok([num(key, parts[0])?, num(key, parts[1])?])
}

fn flag(key: &str, v: &str) -> Result<bool, ConfigError> {
    match v {
        "1" | "true" | "yes" | "on" => Ok(true),
        "0" | "false" | "no" | "off" => Ok(false),
        _ => Err(bad(key, v, "expected true or false")),
    }
}

impl RunConfig {
    /// Builds a validated config from key/value pairs; later pairs win.
    pub fn from_pairs(pairs: &[(String, String)]) -> Result<RunConfig, ConfigError> {
        let mut map = BTreeMap::new();
        for (k, v) in pairs {
            if !KEYS.contains(&k.as_str()) {
                return Err(ConfigError::UnknownKey(k.clone()));
            }
            map.insert(k.as_str(), v.as_str());
        }
        let get = |k: &str| map.get(k).copied();
        let problem = match get("problem").unwrap_or("example61") {
            "example61" => ProblemId::Example61,
            "example62" => ProblemId::Example62,
            "custom" => ProblemId::Custom,
            other => return Err(bad("problem", other, "expected example61, example62 or custom")),
        };
        let theta = get("theta").map_or(Ok(0.4), |v| num("theta", v))?;
        if !(theta > 0.0 && theta <= 1.0) {
            return Err(bad("theta", get("theta").unwrap_or_default(), "must lie in (0, 1]"));
        }
        let max_dof = get("max_dof").map_or(Ok(20_000), |v| num("max_dof", v))?;
        let max_levels = get("max_levels").map_or(Ok(60), |v| num("max_levels", v))?;
        if max_levels == 0 {
            return Err(bad("max_levels", "0", "must be positive"));
        }
        let material = match (get("mu"), get("chi"), get("young"), get("poisson")) {
            (None, None, None, None) => None,
            (Some(m), Some(c), None, None) => Some(MaterialOverride::Lame { mu: num("mu", m)?, chi: num("chi", c)? }),
            (None, None, Some(e), Some(n)) => {
                Some(MaterialOverride::Engineering { young: num("young", e)?, poisson: num("poisson", n)? })
            }
            _ => return Err(bad("material", "", "give either mu and chi, or young and poisson")),
        };
        let mesh = get("mesh").map(PathBuf::from);
        if problem == ProblemId::Custom && mesh.is_none() {
            return Err(ConfigError::Missing("mesh (required for problem=custom)"));
        }
        let raw_contact_residual = match get("eta5").unwrap_or("balanced") {
            "balanced" => false,
            "raw" => true,
            other => return Err(bad("eta5", other, "expected balanced or raw")),
        };
        Ok(RunConfig {
            problem,
            theta,
            max_dof,
            max_levels,
            out: PathBuf::from(get("out").unwrap_or("out")),
            mesh,
            material,
            force: get("force").map_or(Ok([0.0, 0.0]), |v| pair("force", v))?,
            dirichlet: get("dirichlet").map_or(Ok([0.0, 0.0]), |v| pair("dirichlet", v))?,
            gap: get("gap").map_or(Ok(0.0), |v| num("gap", v))?,
            raw_contact_residual,
            test_mode: get("test_mode").map_or(Ok(false), |v| flag("test_mode", v))?,
        })
    }
}
