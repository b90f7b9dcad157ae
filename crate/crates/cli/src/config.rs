//! Pipeline configuration file.

use std::path::Path;

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};

use editsum_core::curator::{CuratorConfig, DatasetSpec};
use editsum_core::ingest::IngestConfig;
use editsum_core::metrics::MetricsConfig;
use editsum_core::promptgen::PromptgenConfig;
use editsum_core::rankstats::RankstatsConfig;

use crate::error::Invalid;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineConfig {
    /// Seed for every sampling step.
    pub seed: u64,
    /// Worker threads for data-parallel stages; 0 uses all cores.
    pub workers: usize,
    pub ingest: IngestConfig,
    pub curator: CuratorConfig,
    pub promptgen: PromptgenConfig,
    pub metrics: MetricsConfig,
    pub rankstats: RankstatsConfig,
    pub dataset: DatasetSpec,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            seed: 42,
            workers: 0,
            ingest: IngestConfig::default(),
            curator: CuratorConfig::default(),
            promptgen: PromptgenConfig::default(),
            metrics: MetricsConfig::default(),
            rankstats: RankstatsConfig::default(),
            dataset: DatasetSpec::default(),
        }
    }
}

impl PipelineConfig {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let config = match path {
            None => Self::default(),
            Some(p) => {
                let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
                Self::parse(&text).with_context(|| format!("in {}", p.display()))?
            }
        };
        Ok(config)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let config: Self = toml::from_str(text).map_err(|e| Invalid(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), Invalid> {
        self.curator.validate().map_err(Invalid)?;
        let checks: [(&str, bool); 9] = [
            ("ingest.requests_per_second", self.ingest.requests_per_second > 0.0),
            ("ingest.timeout_secs", self.ingest.timeout_secs > 0),
            ("ingest.retry.max_attempts", self.ingest.retry.max_attempts > 0),
            ("promptgen.concurrency", self.promptgen.concurrency > 0),
            ("promptgen.params.max_tokens", self.promptgen.params.max_tokens > 0),
            ("metrics.bootstrap_resamples", self.metrics.bootstrap_resamples > 0),
            ("rankstats.plackett_luce.max_iterations", self.rankstats.plackett_luce.max_iterations > 0),
            ("rankstats.plackett_luce.tolerance", self.rankstats.plackett_luce.tolerance > 0.0),
            ("dataset.train_size", self.dataset.train_size > 0),
        ];
        if let Some((name, _)) = checks.iter().find(|(_, ok)| !ok) {
            return Err(Invalid(format!("{name} must be positive")));
        }
        if !(0.0..=1.0).contains(&self.dataset.synthetic_fraction) {
            return Err(Invalid("dataset.synthetic_fraction must lie in [0, 1]".into()));
        }
        Ok(())
    }
}
