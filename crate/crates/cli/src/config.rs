use std::path::Path;

use anyhow::{Context, Result};
use backtalk_core::balance::{BinSpec, SplitRatio, SplitUnit};
use backtalk_core::control::DEFAULT_N_QUANTILES;
use backtalk_core::corpus::{PrepareConfig, SynthSpec};
use backtalk_core::engine::EngineConfig;
use backtalk_core::model::{ModelConfig, TrainConfig};
use serde::Deserialize;

pub const DEFAULT_SEED: u64 = 42;

/// Optional TOML file; every table may be omitted.
///
/// ```toml
/// seed = 7
/// [train]
/// learning_rate = 3e-3
/// epochs = 8
/// ```
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub seed: Option<u64>,
    pub synth: SynthSpec,
    pub prepare: PrepareConfig,
    pub balance: BalanceConfig,
    pub controls: ControlsConfig,
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub engine: EngineConfig,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BalanceConfig {
    /// Inclusive upper word-count edges; the last bin is open-ended.
    pub bin_upper_edges: Option<Vec<usize>>,
    pub ratio: SplitRatio,
    pub split_unit: SplitUnit,
}

impl BalanceConfig {
    pub fn bins(&self) -> Result<BinSpec> {
        Ok(match &self.bin_upper_edges {
            Some(edges) => BinSpec::from_upper_edges(edges.clone())?,
            None => BinSpec::default(),
        })
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ControlsConfig {
    pub n_quantiles: usize,
}

impl Default for ControlsConfig {
    fn default() -> Self {
        Self { n_quantiles: DEFAULT_N_QUANTILES }
    }
}

impl PipelineConfig {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }

    /// Flag, then config file, then the built-in default.
    pub fn seed(&self, flag: Option<u64>) -> u64 {
        flag.or(self.seed).unwrap_or(DEFAULT_SEED)
    }
}
