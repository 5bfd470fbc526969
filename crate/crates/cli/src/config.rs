//! Run configuration: an optional TOML or JSON file, overridden by flags.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use blockspin::harness::suites::SuiteConfig;
use blockspin::harness::SweepConfig;
use blockspin::sampler::{InitialState, SamplerConfig};
use blockspin::{ModelParams, ParamMode};
use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};

pub const THREADS_ENV: &str = "BLOCKSPIN_THREADS";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
    Bin,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Init {
    AllPlus,
    AllMinus,
    UniformRandom,
}

impl From<Init> for InitialState {
    fn from(init: Init) -> Self {
        match init {
            Init::AllPlus => InitialState::AllPlus,
            Init::AllMinus => InitialState::AllMinus,
            Init::UniformRandom => InitialState::UniformRandom,
        }
    }
}

/// Flags shared by every command.
#[derive(Debug, Clone, Default, Args)]
pub struct CommonArgs {
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub n_spins: Option<usize>,
    #[arg(long)]
    pub n_blocks: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// TOML or JSON file; flags take precedence over its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Worker threads; defaults to BLOCKSPIN_THREADS, then all cores.
    #[arg(long)]
    pub threads: Option<usize>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSection {
    pub beta: Option<f64>,
    pub alpha: Option<f64>,
    pub n_spins: Option<usize>,
    pub n_blocks: Option<usize>,
    pub mode: Option<ParamMode>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplerSection {
    pub seed: Option<u64>,
    pub burn_in_sweeps: Option<usize>,
    pub thinning_sweeps: Option<usize>,
    pub n_samples: Option<usize>,
    pub init: Option<Init>,
    pub replicas: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    pub model: ModelSection,
    pub sampler: SamplerSection,
    pub suite: Option<SuiteConfig>,
    pub sweep: Option<SweepConfig>,
    pub out: Option<PathBuf>,
    pub threads: Option<usize>,
    pub format: Option<Format>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let is_json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
        if is_json {
            serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
        } else {
            toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))
        }
    }
}

/// The fully resolved configuration, echoed into every output.
#[derive(Debug, Clone, Serialize)]
pub struct Resolved {
    pub command: String,
    pub version: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub model: Option<ModelParams>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sampler: Option<SamplerConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub replicas: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub suite: Option<SuiteConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepConfig>,
    pub out: PathBuf,
    pub threads: Option<usize>,
    pub format: Format,
}

impl Resolved {
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("config serializes")
    }
}

pub struct Layered {
    pub common: CommonArgs,
    pub file: FileConfig,
}

impl Layered {
    pub fn new(common: CommonArgs) -> Result<Self> {
        let file = match &common.config {
            Some(p) => FileConfig::load(p)?,
            None => FileConfig::default(),
        };
        Ok(Self { common, file })
    }

    pub fn model(&self) -> Result<ModelParams> {
        let m = &self.file.model;
        let beta = self.common.beta.or(m.beta).unwrap_or(0.5);
        let alpha = self.common.alpha.or(m.alpha).unwrap_or(0.2);
        let n_spins = self.common.n_spins.or(m.n_spins).unwrap_or(1200);
        let n_blocks = self.common.n_blocks.or(m.n_blocks).unwrap_or(6);
        let mode = m.mode.unwrap_or_default();
        Ok(ModelParams::with_mode(beta, alpha, n_spins, n_blocks, mode)?)
    }

    pub fn seed(&self) -> u64 {
        self.common.seed.or(self.file.sampler.seed).unwrap_or(0)
    }

    pub fn threads(&self) -> Result<Option<usize>> {
        if let Some(t) = self.common.threads.or(self.file.threads) {
            return Ok(Some(t));
        }
        match std::env::var(THREADS_ENV) {
            Ok(v) if !v.trim().is_empty() => {
                let t = v
                    .trim()
                    .parse()
                    .with_context(|| format!("{THREADS_ENV}={v:?} is not a thread count"))?;
                Ok(Some(t))
            }
            _ => Ok(None),
        }
    }

    pub fn format(&self, default: Format) -> Format {
        self.common.format.or(self.file.format).unwrap_or(default)
    }

    pub fn out(&self, default: &str) -> PathBuf {
        self.common
            .out
            .clone()
            .or_else(|| self.file.out.clone())
            .unwrap_or_else(|| PathBuf::from(default))
    }

    pub fn resolved(&self, command: &str, default_format: Format, default_out: &str) -> Result<Resolved> {
        Ok(Resolved {
            command: command.to_string(),
            version: blockspin::harness::VERSION.to_string(),
            model: None,
            sampler: None,
            replicas: None,
            suite: None,
            sweep: None,
            out: self.out(default_out),
            threads: self.threads()?,
            format: self.format(default_format),
        })
    }
}

/// Sampler flags of `simulate`.
#[derive(Debug, Clone, Default, Args)]
pub struct SamplerArgs {
    #[arg(long)]
    pub burn_in: Option<usize>,
    #[arg(long)]
    pub thinning: Option<usize>,
    #[arg(long)]
    pub samples: Option<usize>,
    #[arg(long)]
    pub replicas: Option<usize>,
    #[arg(long, value_enum)]
    pub init: Option<Init>,
}

impl SamplerArgs {
    pub fn resolve(&self, layered: &Layered) -> Result<(SamplerConfig, usize)> {
        let f = &layered.file.sampler;
        let config = SamplerConfig {
            seed: layered.seed(),
            burn_in_sweeps: self.burn_in.or(f.burn_in_sweeps).unwrap_or(100),
            thinning_sweeps: self.thinning.or(f.thinning_sweeps).unwrap_or(1),
            n_samples: self.samples.or(f.n_samples).unwrap_or(500),
            init: self.init.or(f.init).unwrap_or(Init::AllPlus).into(),
        };
        config.validate()?;
        let replicas = self.replicas.or(f.replicas).unwrap_or(1);
        if replicas == 0 {
            bail!("replicas must be at least 1");
        }
        Ok((config, replicas))
    }
}
