//! Optimizer configuration and the TOML config file format.
//!
//! A config file is a flat TOML document. Every key is optional and falls back
//! to the defaults below; unknown keys are rejected.
//!
//! ```toml
//! t = 50                # initial population
//! k = 10                # elite size
//! u = 5.0               # latent box half-width
//! m = 2                 # mutations per elite specimen
//! s = 0.5               # mutation standard deviation
//! alpha = 0.3           # momentum rate
//! threshold = 0.95      # convergence confidence
//! max_calls = 5000      # model-call budget
//! latent_dim = 4        # inferred from the fixture when omitted
//! target_class = 0
//! converge_on = "elite" # or "best"
//! learning_rate = 0.1   # gradient baseline
//! momentum = 0.9        # gradient baseline
//!
//! fixture = "multimodal"          # a built-in fixture, or:
//! # [generator]
//! # kind = "affine"               # identity | affine | mlp
//! # path = "decoder.mlp"          # relative to this file
//! # [oracle]
//! # kind = "centroid"             # centroid | mlp
//! # path = "oracle.centroid"
//!
//! [sweep]                         # one axis at a time, in file order
//! k = [5, 10, 20]
//! alpha = [0.0, 0.3]
//! ```

use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which specimens must clear the threshold for a run to count as converged.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ConvergeOn {
    /// Every member of the top-k elite.
    #[default]
    Elite,
    /// The single best specimen.
    Best,
}

impl std::str::FromStr for ConvergeOn {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "elite" => Ok(Self::Elite),
            "best" => Ok(Self::Best),
            other => Err(Error::Config(format!(
                "converge_on must be \"best\" or \"elite\", got {other:?}"
            ))),
        }
    }
}

impl fmt::Display for ConvergeOn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Elite => "elite",
            Self::Best => "best",
        })
    }
}

/// Hyperparameters of the evolutionary strategy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EsConfig {
    pub t: usize,
    pub k: usize,
    pub u: f64,
    pub m: usize,
    pub s: f64,
    pub alpha: f64,
    pub threshold: f64,
    pub max_calls: u64,
    pub latent_dim: usize,
    pub target_class: usize,
    pub converge_on: ConvergeOn,
}

impl Default for EsConfig {
    fn default() -> Self {
        Self {
            t: 50,
            k: 10,
            u: 5.0,
            m: 2,
            s: 0.5,
            alpha: 0.3,
            threshold: 0.95,
            max_calls: 5000,
            latent_dim: 4,
            target_class: 0,
            converge_on: ConvergeOn::Elite,
        }
    }
}

impl EsConfig {
    /// Calls consumed by one generation after the initial population.
    pub fn calls_per_generation(&self) -> u64 {
        (self.k * self.m) as u64
    }
}

fn ensure(cond: bool, msg: impl Into<String>) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::Config(msg.into()))
    }
}

fn check_shared(u: f64, threshold: f64, max_calls: u64, latent_dim: usize) -> Result<()> {
    ensure(latent_dim >= 1, "latent_dim must be >= 1")?;
    ensure(u > 0.0 && u.is_finite(), "u must be > 0")?;
    ensure(threshold > 0.0 && threshold < 1.0, "threshold must lie in (0, 1)")?;
    ensure(max_calls >= 1, "max_calls must be >= 1")
}

/// Returns `cfg` unchanged when every invariant holds, otherwise an error
/// naming the first violated constraint.
pub fn validate_config(cfg: EsConfig) -> Result<EsConfig> {
    ensure(cfg.t >= 1, "t must be >= 1")?;
    ensure(cfg.k >= 1, "k must be >= 1")?;
    ensure(cfg.k <= cfg.t, "k must not exceed t")?;
    ensure(cfg.m >= 1, "m must be >= 1")?;
    ensure(cfg.s > 0.0 && cfg.s.is_finite(), "s must be > 0")?;
    ensure(cfg.alpha >= 0.0, "alpha must be >= 0")?;
    ensure(cfg.alpha < 1.0, "alpha must be < 1")?;
    check_shared(cfg.u, cfg.threshold, cfg.max_calls, cfg.latent_dim)?;
    Ok(cfg)
}

/// Hyperparameters of the gradient-ascent-with-momentum baseline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GdConfig {
    pub learning_rate: f64,
    pub momentum: f64,
    pub u: f64,
    pub threshold: f64,
    pub max_calls: u64,
    pub latent_dim: usize,
    pub target_class: usize,
}

impl Default for GdConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.1,
            momentum: 0.9,
            u: 5.0,
            threshold: 0.95,
            max_calls: 5000,
            latent_dim: 4,
            target_class: 0,
        }
    }
}

pub fn validate_gd_config(cfg: GdConfig) -> Result<GdConfig> {
    ensure(
        cfg.learning_rate > 0.0 && cfg.learning_rate.is_finite(),
        "learning_rate must be > 0",
    )?;
    ensure(cfg.momentum >= 0.0, "momentum must be >= 0")?;
    ensure(cfg.momentum < 1.0, "momentum must be < 1")?;
    check_shared(cfg.u, cfg.threshold, cfg.max_calls, cfg.latent_dim)?;
    Ok(cfg)
}

/// Where a generator or oracle comes from when not using a built-in fixture.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComponentSpec {
    pub kind: String,
    #[serde(default)]
    pub path: Option<PathBuf>,
    /// Latent dimension for the identity generator.
    #[serde(default)]
    pub dim: Option<usize>,
}

/// A hyperparameter that a sweep may vary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepAxis {
    T,
    K,
    Alpha,
    M,
    S,
}

impl SweepAxis {
    pub fn name(self) -> &'static str {
        match self {
            Self::T => "t",
            Self::K => "k",
            Self::Alpha => "alpha",
            Self::M => "m",
            Self::S => "s",
        }
    }

    fn parse(name: &str) -> Result<Self> {
        Ok(match name {
            "t" => Self::T,
            "k" => Self::K,
            "alpha" => Self::Alpha,
            "m" => Self::M,
            "s" => Self::S,
            other => {
                return Err(Error::Config(format!(
                    "unknown sweep axis {other:?} (expected t, k, alpha, m or s)"
                )))
            }
        })
    }

    /// Applies `value` to a copy of `base`.
    pub fn apply(self, base: &EsConfig, value: f64) -> Result<EsConfig> {
        let as_count = |v: f64| -> Result<usize> {
            if v >= 1.0 && v.fract() == 0.0 {
                Ok(v as usize)
            } else {
                Err(Error::Config(format!(
                    "sweep value {v} for {} must be a positive integer",
                    self.name()
                )))
            }
        };
        let mut cfg = base.clone();
        match self {
            Self::T => cfg.t = as_count(value)?,
            Self::K => cfg.k = as_count(value)?,
            Self::M => cfg.m = as_count(value)?,
            Self::Alpha => cfg.alpha = value,
            Self::S => cfg.s = value,
        }
        validate_config(cfg)
    }
}

/// A base configuration plus one-axis-at-a-time parameter grids.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub base: EsConfig,
    pub axes: Vec<(SweepAxis, Vec<f64>)>,
}

impl SweepSpec {
    /// Validates every grid point and returns the configs in declaration
    /// order.
    pub fn points(&self) -> Result<Vec<(SweepAxis, f64, EsConfig)>> {
        let mut out = Vec::new();
        for (axis, values) in &self.axes {
            for &v in values {
                out.push((*axis, v, axis.apply(&self.base, v)?));
            }
        }
        Ok(out)
    }
}

/// The parsed contents of a config file.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub t: Option<usize>,
    pub k: Option<usize>,
    pub u: Option<f64>,
    pub m: Option<usize>,
    pub s: Option<f64>,
    pub alpha: Option<f64>,
    pub threshold: Option<f64>,
    pub max_calls: Option<u64>,
    pub latent_dim: Option<usize>,
    pub target_class: Option<usize>,
    pub converge_on: Option<ConvergeOn>,
    pub learning_rate: Option<f64>,
    pub momentum: Option<f64>,
    pub fixture: Option<String>,
    pub generator: Option<ComponentSpec>,
    pub oracle: Option<ComponentSpec>,
    #[serde(default)]
    pub sweep: Option<toml::Table>,
    /// Directory that relative component paths resolve against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

/// Keys accepted by `--set key=value`.
pub const OVERRIDABLE_KEYS: &[&str] = &[
    "t",
    "k",
    "u",
    "m",
    "s",
    "alpha",
    "threshold",
    "max_calls",
    "latent_dim",
    "target_class",
    "converge_on",
    "learning_rate",
    "momentum",
    "fixture",
];

impl ConfigFile {
    /// Reads a config file. When `path` does not exist but `path.toml` does,
    /// the latter is used.
    pub fn load(path: &Path) -> Result<Self> {
        Self::load_with_overrides(path, &[])
    }

    /// Reads a config file and applies `key=value` overrides before
    /// type-checking.
    pub fn load_with_overrides(path: &Path, overrides: &[String]) -> Result<Self> {
        let resolved = resolve_config_path(path)?;
        let text = std::fs::read_to_string(&resolved)?;
        let mut cfg = Self::parse_with_overrides(&text, overrides)?;
        cfg.base_dir = resolved.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(cfg)
    }

    pub fn parse(text: &str) -> Result<Self> {
        Self::parse_with_overrides(text, &[])
    }

    pub fn parse_with_overrides(text: &str, overrides: &[String]) -> Result<Self> {
        let mut table: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| Error::Config(e.message().to_string()))?;
        for item in overrides {
            let (key, value) = parse_override(item)?;
            table.insert(key, value);
        }
        let cfg: Self = toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config(e.message().to_string()))?;
        if cfg.fixture.is_some() && (cfg.generator.is_some() || cfg.oracle.is_some()) {
            return Err(Error::Config(
                "`fixture` cannot be combined with [generator] or [oracle]".into(),
            ));
        }
        Ok(cfg)
    }

    /// ES config, using `default_latent_dim` when the file leaves it unset.
    pub fn es_config(&self, default_latent_dim: usize) -> Result<EsConfig> {
        let d = EsConfig::default();
        validate_config(EsConfig {
            t: self.t.unwrap_or(d.t),
            k: self.k.unwrap_or(d.k),
            u: self.u.unwrap_or(d.u),
            m: self.m.unwrap_or(d.m),
            s: self.s.unwrap_or(d.s),
            alpha: self.alpha.unwrap_or(d.alpha),
            threshold: self.threshold.unwrap_or(d.threshold),
            max_calls: self.max_calls.unwrap_or(d.max_calls),
            latent_dim: self.latent_dim.unwrap_or(default_latent_dim),
            target_class: self.target_class.unwrap_or(d.target_class),
            converge_on: self.converge_on.unwrap_or(d.converge_on),
        })
    }

    pub fn gd_config(&self, default_latent_dim: usize) -> Result<GdConfig> {
        let d = GdConfig::default();
        validate_gd_config(GdConfig {
            learning_rate: self.learning_rate.unwrap_or(d.learning_rate),
            momentum: self.momentum.unwrap_or(d.momentum),
            u: self.u.unwrap_or(d.u),
            threshold: self.threshold.unwrap_or(d.threshold),
            max_calls: self.max_calls.unwrap_or(d.max_calls),
            latent_dim: self.latent_dim.unwrap_or(default_latent_dim),
            target_class: self.target_class.unwrap_or(d.target_class),
        })
    }

    /// The `[sweep]` section over `base`, or `None` when the file has none.
    pub fn sweep_spec(&self, base: &EsConfig) -> Result<Option<SweepSpec>> {
        let Some(table) = &self.sweep else {
            return Ok(None);
        };
        let mut axes = Vec::new();
        for (name, value) in table {
            let axis = SweepAxis::parse(name)?;
            let values = value
                .as_array()
                .ok_or_else(|| Error::Config(format!("sweep.{name} must be an array")))?
                .iter()
                .map(|v| {
                    v.as_float()
                        .or_else(|| v.as_integer().map(|i| i as f64))
                        .ok_or_else(|| Error::Config(format!("sweep.{name} must hold numbers")))
                })
                .collect::<Result<Vec<_>>>()?;
            if values.is_empty() {
                return Err(Error::Config(format!("sweep.{name} is empty")));
            }
            axes.push((axis, values));
        }
        let spec = SweepSpec {
            base: base.clone(),
            axes,
        };
        spec.points()?;
        Ok(Some(spec))
    }

    /// Resolves a component path relative to the config file.
    pub fn resolve(&self, path: &Path) -> PathBuf {
        if path.is_absolute() {
            path.to_path_buf()
        } else {
            self.base_dir.join(path)
        }
    }
}

fn resolve_config_path(path: &Path) -> Result<PathBuf> {
    if path.is_file() {
        return Ok(path.to_path_buf());
    }
    let mut with_ext = path.as_os_str().to_owned();
    with_ext.push(".toml");
    let with_ext = PathBuf::from(with_ext);
    if with_ext.is_file() {
        Ok(with_ext)
    } else {
        Err(Error::ConfigNotFound(path.to_path_buf()))
    }
}

fn parse_override(item: &str) -> Result<(String, toml::Value)> {
    let (key, raw) = item
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("override {item:?} is not key=value")))?;
    let key = key.trim();
    if !OVERRIDABLE_KEYS.contains(&key) {
        return Err(Error::Config(format!("unknown config key {key:?}")));
    }
    let raw = raw.trim();
    // Bare words such as `elite` are taken as strings.
    let value = format!("v = {raw}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()));
    Ok((key.to_string(), value))
}
