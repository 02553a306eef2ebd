//! Run configuration: a single JSON document with CLI overrides.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunConfig {
    /// Level-I CSV input (one trading session).
    pub input_csv: PathBuf,
    #[serde(default)]
    pub asset: Option<String>,
    /// Tick size in price units, metadata only (prices are in ticks).
    #[serde(default = "default_tick")]
    pub tick_size: f64,
    /// Exponential decay grid, ascending (1/seconds).
    #[serde(default = "default_betas")]
    pub betas: Vec<f64>,
    /// Baseline table cap for the single-queue models.
    #[serde(default = "default_q_max")]
    pub q_max: u32,
    /// Quantile buckets per side for the two-sided state grid.
    #[serde(default = "default_buckets")]
    pub n_buckets: usize,
    #[serde(default = "default_min_events")]
    pub min_events_per_segment: usize,
    /// Which side's segments feed the single-queue fits: `pooled`
    /// (default, bid and ask as independent realizations of one law),
    /// `bid` or `ask`.
    #[serde(default = "default_side")]
    pub side: String,
    /// Relative convergence tolerance of the fits.
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    #[serde(default = "default_max_sweeps")]
    pub max_sweeps: usize,
    #[serde(default = "default_seed")]
    pub seed: u64,
    /// Simulation horizon (seconds).
    #[serde(default = "default_horizon")]
    pub horizon: f64,
    #[serde(default)]
    pub burn_in: f64,
    #[serde(default = "default_sample_interval")]
    pub sample_interval: f64,
    #[serde(default)]
    pub initial_queue: u32,
    #[serde(default = "default_out")]
    pub out_dir: PathBuf,
}

fn default_tick() -> f64 {
    1.0
}
fn default_betas() -> Vec<f64> {
    // Large-tick defaults; small-tick assets typically use
    // (40, 2100, 5200).
    vec![60.0, 1500.0, 5500.0]
}
fn default_q_max() -> u32 {
    149
}
fn default_buckets() -> usize {
    5
}
fn default_min_events() -> usize {
    20
}
fn default_side() -> String {
    "pooled".into()
}
fn default_tol() -> f64 {
    1e-7
}
fn default_max_iter() -> usize {
    20_000
}
fn default_max_sweeps() -> usize {
    60
}
fn default_seed() -> u64 {
    1
}
fn default_horizon() -> f64 {
    100_000.0
}
fn default_sample_interval() -> f64 {
    30.0
}
fn default_out() -> PathBuf {
    PathBuf::from("out")
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let config: RunConfig =
            serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.input_csv.exists() {
            bail!("input file {} does not exist", self.input_csv.display());
        }
        if self.betas.is_empty() {
            bail!("decay grid must not be empty");
        }
        if self.betas.windows(2).any(|w| w[1] <= w[0]) || self.betas[0] <= 0.0 {
            bail!("decays must be positive and strictly increasing");
        }
        if self.n_buckets == 0 {
            bail!("need at least one state bucket per side");
        }
        if !(self.horizon > self.burn_in) {
            bail!("horizon must exceed burn_in");
        }
        if !["pooled", "bid", "ask"].contains(&self.side.as_str()) {
            bail!("side must be pooled, bid or ask");
        }
        Ok(())
    }
}
