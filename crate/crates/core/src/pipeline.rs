//! Resolving a config file and plugin commands into a [`Pipeline`].

use std::path::PathBuf;
use std::time::Duration;

use crate::config::{ComponentSpec, ConfigFile};
use crate::error::{Error, Result};
use crate::fixtures::{BuiltinFixture, Pipeline, PipelineSource};
use crate::generators::{AffineDecoder, Generator, IdentityGenerator, MlpDecoder};
use crate::oracles::{CentroidSoftmaxModel, Oracle, ToyMlpModel};
use crate::plugin::{timeout_from_env, SubprocessGenerator, SubprocessOracle};

#[derive(Debug, Clone, PartialEq)]
pub enum GeneratorSource {
    Identity(usize),
    Affine(PathBuf),
    Mlp(PathBuf),
    Command(String),
}

#[derive(Debug, Clone, PartialEq)]
pub enum OracleSource {
    Centroid(PathBuf),
    Mlp(PathBuf),
    Command(String),
}

/// Where each half of a pipeline comes from. Explicit sources win over the
/// fixture's.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineSpec {
    pub fixture: Option<BuiltinFixture>,
    pub generator: Option<GeneratorSource>,
    pub oracle: Option<OracleSource>,
    pub plugin_timeout: Duration,
}

impl PipelineSpec {
    pub fn fixture(fixture: BuiltinFixture) -> Self {
        Self {
            fixture: Some(fixture),
            generator: None,
            oracle: None,
            plugin_timeout: crate::plugin::DEFAULT_TIMEOUT,
        }
    }

    /// Reads `fixture`, `[generator]` and `[oracle]` from `cfg`. The plugin
    /// timeout comes from the environment.
    pub fn from_config(cfg: &ConfigFile) -> Result<Self> {
        let fixture = cfg.fixture.as_deref().map(str::parse).transpose()?;
        let generator = cfg.generator.as_ref().map(|c| generator_source(cfg, c)).transpose()?;
        let oracle = cfg.oracle.as_ref().map(|c| oracle_source(cfg, c)).transpose()?;
        Ok(Self {
            fixture,
            generator,
            oracle,
            plugin_timeout: timeout_from_env()?,
        })
    }

    fn build_generator(&self) -> Result<Box<dyn Generator>> {
        Ok(match &self.generator {
            Some(GeneratorSource::Identity(d)) => Box::new(IdentityGenerator::new(*d)),
            Some(GeneratorSource::Affine(p)) => Box::new(AffineDecoder::load(p)?),
            Some(GeneratorSource::Mlp(p)) => Box::new(MlpDecoder::load(p)?),
            Some(GeneratorSource::Command(c)) => Box::new(SubprocessGenerator::spawn(c, self.plugin_timeout)?),
            None => match self.fixture {
                Some(f) => f.build().generator,
                None => {
                    return Err(Error::Config(
                        "no generator: set `fixture`, [generator] or a generator command".into(),
                    ))
                }
            },
        })
    }

    fn build_oracle(&self) -> Result<Box<dyn Oracle>> {
        Ok(match &self.oracle {
            Some(OracleSource::Centroid(p)) => Box::new(CentroidSoftmaxModel::load(p)?),
            Some(OracleSource::Mlp(p)) => Box::new(ToyMlpModel::load(p)?),
            Some(OracleSource::Command(c)) => Box::new(SubprocessOracle::spawn(c, self.plugin_timeout)?),
            None => match self.fixture {
                Some(f) => f.build().oracle,
                None => {
                    return Err(Error::Config(
                        "no oracle: set `fixture`, [oracle] or an oracle command".into(),
                    ))
                }
            },
        })
    }
}

impl PipelineSource for PipelineSpec {
    fn open(&self) -> Result<Pipeline> {
        let generator = self.build_generator()?;
        let oracle = self.build_oracle()?;
        if let Some(d) = oracle.sample_dim() {
            if d != generator.sample_dim() {
                return Err(Error::Dimension(format!(
                    "generator emits {}-dim samples but the oracle expects {d}",
                    generator.sample_dim()
                )));
            }
        }
        Ok(Pipeline { generator, oracle })
    }
}

fn required_path(cfg: &ConfigFile, spec: &ComponentSpec) -> Result<PathBuf> {
    spec.path
        .as_deref()
        .map(|p| cfg.resolve(p))
        .ok_or_else(|| Error::Config(format!("component kind {:?} needs a `path`", spec.kind)))
}

fn generator_source(cfg: &ConfigFile, spec: &ComponentSpec) -> Result<GeneratorSource> {
    Ok(match spec.kind.as_str() {
        "identity" => GeneratorSource::Identity(
            spec.dim
                .filter(|d| *d >= 1)
                .ok_or_else(|| Error::Config("identity generator needs `dim` >= 1".into()))?,
        ),
        "affine" => GeneratorSource::Affine(required_path(cfg, spec)?),
        "mlp" => GeneratorSource::Mlp(required_path(cfg, spec)?),
        other => {
            return Err(Error::Config(format!(
                "unknown generator kind {other:?} (expected identity, affine or mlp)"
            )))
        }
    })
}

fn oracle_source(cfg: &ConfigFile, spec: &ComponentSpec) -> Result<OracleSource> {
    Ok(match spec.kind.as_str() {
        "centroid" => OracleSource::Centroid(required_path(cfg, spec)?),
        "mlp" => OracleSource::Mlp(required_path(cfg, spec)?),
        other => {
            return Err(Error::Config(format!(
                "unknown oracle kind {other:?} (expected centroid or mlp)"
            )))
        }
    })
}
