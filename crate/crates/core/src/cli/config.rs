//! Run configuration: a flat `key = value` file overlaid by command-line flags.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use crate::bootstrap::BootstrapMode;
use crate::error::{Error, Result};
use crate::smoothing::BandwidthMatrix;
use crate::spatial::{Bounds, GridSpec, Location};

/// Keys accepted in a configuration file.
pub const CONFIG_KEYS: [&str; 16] = [
    "input", "output", "mode", "thresholds", "B", "seed", "bandwidth", "h3", "grid", "targets",
    "threads", "allow_small", "ik", "scenario", "n_sim", "field",
];

/// Raw settings as strings, from either source.
pub type Settings = BTreeMap<String, String>;

/// Parses `key = value` lines; `#` starts a comment, blank lines are skipped.
pub fn parse_config_text(text: &str) -> Result<Settings> {
    let mut out = Settings::new();
    for (k, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("line {}: expected key = value", k + 1)))?;
        let key = key.trim();
        if !CONFIG_KEYS.contains(&key) {
            return Err(Error::Config(format!("line {}: unknown key `{key}`", k + 1)));
        }
        out.insert(key.to_string(), value.trim().to_string());
    }
    Ok(out)
}

pub fn read_config(path: &Path) -> Result<Settings> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    parse_config_text(&text)
}

/// Bandwidth choice for the trend and variance smoothers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BandwidthSpec {
    Auto,
    /// Trend bandwidth, and the variance bandwidth when given separately.
    Explicit(BandwidthMatrix, Option<BandwidthMatrix>),
}

/// Estimation grid: `nx x ny` nodes over explicit bounds, or over the
/// sample's bounding box.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridArg {
    pub nx: usize,
    pub ny: usize,
    pub bounds: Option<Bounds>,
}

impl GridArg {
    pub fn spec(&self, sample: &[Location]) -> Result<GridSpec> {
        let bounds = match self.bounds {
            Some(b) => b,
            None => Bounds::enclosing(sample).ok_or(Error::InvalidInput("empty sample".into()))?,
        };
        GridSpec::new(self.nx, self.ny, bounds)
    }
}

/// Fully resolved settings.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub input: Option<PathBuf>,
    pub output: Option<PathBuf>,
    pub mode: BootstrapMode,
    pub thresholds: Vec<f64>,
    pub b: Option<usize>,
    pub seed: Option<u64>,
    pub bandwidth: BandwidthSpec,
    pub h3: Option<f64>,
    pub grid: Option<GridArg>,
    pub targets: Option<PathBuf>,
    pub threads: Option<usize>,
    pub allow_small: bool,
    pub ik: bool,
    pub scenario: Option<String>,
    pub n_sim: Option<usize>,
    pub field: usize,
}

fn bad(key: &str, value: &str, why: &str) -> Error {
    Error::Config(format!("{key} = `{value}`: {why}"))
}

fn parse_num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
    v.trim().parse().map_err(|_| bad(key, v, "not a valid number"))
}

fn parse_bool(key: &str, v: &str) -> Result<bool> {
    match v.trim() {
        "true" | "yes" | "1" | "on" => Ok(true),
        "false" | "no" | "0" | "off" => Ok(false),
        _ => Err(bad(key, v, "expected true or false")),
    }
}

pub fn parse_thresholds(v: &str) -> Result<Vec<f64>> {
    let out: Vec<f64> = v
        .split(',')
        .map(|t| parse_num::<f64>("thresholds", t))
        .collect::<Result<_>>()?;
    if out.iter().any(|c| !c.is_finite()) {
        return Err(bad("thresholds", v, "thresholds must be finite"));
    }
    Ok(out)
}

fn parse_matrix(v: &str) -> Result<BandwidthMatrix> {
    let parts: Vec<f64> = v.split(',').map(|t| parse_num("bandwidth", t)).collect::<Result<_>>()?;
    match parts.as_slice() {
        [h] => BandwidthMatrix::isotropic(*h),
        [a, b, c] => BandwidthMatrix::new(*a, *b, *c),
        _ => Err(bad("bandwidth", v, "expected h or h11,h12,h22")),
    }
    .map_err(|_| bad("bandwidth", v, "not symmetric positive definite"))
}

/// `auto`, `h11,h12,h22` (trend only) or `h11,h12,h22/h11,h12,h22` (trend and
/// variance). A single number means an isotropic matrix.
pub fn parse_bandwidth(v: &str) -> Result<BandwidthSpec> {
    let v = v.trim();
    if v == "auto" {
        return Ok(BandwidthSpec::Auto);
    }
    match v.split_once('/') {
        Some((a, b)) => Ok(BandwidthSpec::Explicit(parse_matrix(a)?, Some(parse_matrix(b)?))),
        None => Ok(BandwidthSpec::Explicit(parse_matrix(v)?, None)),
    }
}

/// `nx,ny` or `nx,ny,x1_min,x1_max,x2_min,x2_max`.
pub fn parse_grid(v: &str) -> Result<GridArg> {
    let parts: Vec<&str> = v.split(',').map(str::trim).collect();
    let dims = |p: &[&str]| -> Result<(usize, usize)> {
        let nx: usize = parse_num("grid", p[0])?;
        let ny: usize = parse_num("grid", p[1])?;
        if nx == 0 || ny == 0 {
            return Err(bad("grid", v, "grid sides must be positive"));
        }
        Ok((nx, ny))
    };
    match parts.len() {
        2 => {
            let (nx, ny) = dims(&parts)?;
            Ok(GridArg { nx, ny, bounds: None })
        }
        6 => {
            let (nx, ny) = dims(&parts)?;
            let f: Vec<f64> = parts[2..].iter().map(|t| parse_num("grid", t)).collect::<Result<_>>()?;
            if !(f[0] <= f[1] && f[2] <= f[3]) {
                return Err(bad("grid", v, "bounds must be increasing"));
            }
            let bounds = Bounds { x1_min: f[0], x1_max: f[1], x2_min: f[2], x2_max: f[3] };
            Ok(GridArg { nx, ny, bounds: Some(bounds) })
        }
        _ => Err(bad("grid", v, "expected nx,ny or nx,ny,x1min,x1max,x2min,x2max")),
    }
}

impl RunConfig {
    /// Resolves settings; `flags` take precedence over `file`.
    pub fn resolve(file: &Settings, flags: &Settings) -> Result<Self> {
        let get = |k: &str| flags.get(k).or_else(|| file.get(k)).map(String::as_str);
        let thresholds = match get("thresholds") {
            Some(v) => parse_thresholds(v)?,
            None => Vec::new(),
        };
        let b = get("B").map(|v| parse_num::<usize>("B", v)).transpose()?;
        if b == Some(0) {
            return Err(bad("B", "0", "B must be at least 1"));
        }
        let threads = get("threads").map(|v| parse_num::<usize>("threads", v)).transpose()?;
        if threads == Some(0) {
            return Err(bad("threads", "0", "threads must be at least 1"));
        }
        let h3 = get("h3").map(|v| parse_num::<f64>("h3", v)).transpose()?;
        if h3.is_some_and(|h| !(h > 0.0 && h.is_finite())) {
            return Err(bad("h3", get("h3").unwrap_or(""), "must be positive"));
        }
        Ok(Self {
            input: get("input").map(PathBuf::from),
            output: get("output").map(PathBuf::from),
            mode: match get("mode") {
                Some(m) => BootstrapMode::parse(m)?,
                None => BootstrapMode::Conditional,
            },
            thresholds,
            b,
            seed: get("seed").map(|v| parse_num::<u64>("seed", v)).transpose()?,
            bandwidth: match get("bandwidth") {
                Some(v) => parse_bandwidth(v)?,
                None => BandwidthSpec::Auto,
            },
            h3,
            grid: get("grid").map(parse_grid).transpose()?,
            targets: get("targets").map(PathBuf::from),
            threads,
            allow_small: get("allow_small").map(|v| parse_bool("allow_small", v)).transpose()?.unwrap_or(false),
            ik: get("ik").map(|v| parse_bool("ik", v)).transpose()?.unwrap_or(false),
            scenario: get("scenario").map(str::to_string),
            n_sim: get("n_sim").map(|v| parse_num::<usize>("n_sim", v)).transpose()?,
            field: get("field").map(|v| parse_num::<usize>("field", v)).transpose()?.unwrap_or(0),
        })
    }

    pub fn require_input(&self) -> Result<&Path> {
        self.input.as_deref().ok_or_else(|| Error::Config("--input is required".into()))
    }

    pub fn require_thresholds(&self) -> Result<&[f64]> {
        if self.thresholds.is_empty() {
            return Err(Error::Config("--thresholds is required".into()));
        }
        Ok(&self.thresholds)
    }
}
