//! Run settings: command-line flags layered over an optional TOML file of
//! flat `key = value` pairs using the flag names with `_` for `-`.

use std::path::{Path, PathBuf};

use clap::Args;
use serde::Deserialize;

use crate::error::CliError;

#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Settings {
    /// Corpus directory (labels.jsonl, documents.jsonl, variants.jsonl).
    #[arg(long, global = true)]
    pub corpus: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Model name(s), comma separated.
    #[arg(long, global = true, value_delimiter = ',')]
    pub model: Option<Vec<String>>,
    /// Chat-completions endpoint URL.
    #[arg(long, global = true)]
    pub api_url: Option<String>,
    #[arg(long, global = true)]
    pub temperature: Option<f64>,
    /// Upstream provider to pin (sent as provider.order).
    #[arg(long, global = true)]
    pub provider: Option<String>,
    /// Environment variable holding the API key.
    #[arg(long, global = true)]
    pub api_key_env: Option<String>,
    #[arg(long, global = true)]
    pub max_concurrency: Option<usize>,
    #[arg(long, global = true)]
    pub max_retries: Option<u32>,
    /// Prompt template file containing one {facts} placeholder.
    #[arg(long, global = true)]
    pub template: Option<PathBuf>,
    /// Cache directory for generation (default: <out>/cache).
    #[arg(long, global = true)]
    pub cache_dir: Option<PathBuf>,
    /// Significance threshold.
    #[arg(long, global = true)]
    pub tau: Option<f64>,
    /// Restrict to these label ids, comma separated.
    #[arg(long, global = true, value_delimiter = ',')]
    pub labels: Option<Vec<String>>,
    /// Use ln(1 + months) for the bias outcome instead of dropping zeros.
    #[arg(long, global = true, num_args = 0..=1, default_missing_value = "true")]
    pub log1p: Option<bool>,
    /// Months within which a variant prediction counts as unchanged.
    #[arg(long, global = true)]
    pub change_tolerance: Option<f64>,
    /// Inconsistency weights: comparisons or documents.
    #[arg(long, global = true)]
    pub weight_mode: Option<String>,
    /// Prediction files (predictions.jsonl format).
    #[arg(long, global = true, num_args = 1..)]
    pub predictions: Option<Vec<PathBuf>>,
    /// Report bundle to render (default: <out>/bundle.json).
    #[arg(long, global = true)]
    pub bundle: Option<PathBuf>,
    /// Timestamp recorded in the report (default: SOURCE_DATE_EPOCH, else none).
    #[arg(long, global = true)]
    pub timestamp: Option<String>,
    /// Fixture spec file (default: the built-in spec).
    #[arg(long, global = true)]
    pub spec: Option<PathBuf>,
    /// Seed overriding the fixture spec.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
}

impl Settings {
    pub fn load_file(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::usage(format!("{}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| CliError::usage(format!("{}: {e}", path.display())))
    }

    /// Flag values win over file values.
    pub fn over(self, file: Settings) -> Settings {
        Settings {
            corpus: self.corpus.or(file.corpus),
            out: self.out.or(file.out),
            model: self.model.or(file.model),
            api_url: self.api_url.or(file.api_url),
            temperature: self.temperature.or(file.temperature),
            provider: self.provider.or(file.provider),
            api_key_env: self.api_key_env.or(file.api_key_env),
            max_concurrency: self.max_concurrency.or(file.max_concurrency),
            max_retries: self.max_retries.or(file.max_retries),
            template: self.template.or(file.template),
            cache_dir: self.cache_dir.or(file.cache_dir),
            tau: self.tau.or(file.tau),
            labels: self.labels.or(file.labels),
            log1p: self.log1p.or(file.log1p),
            change_tolerance: self.change_tolerance.or(file.change_tolerance),
            weight_mode: self.weight_mode.or(file.weight_mode),
            predictions: self.predictions.or(file.predictions),
            bundle: self.bundle.or(file.bundle),
            timestamp: self.timestamp.or(file.timestamp),
            spec: self.spec.or(file.spec),
            seed: self.seed.or(file.seed),
        }
    }

    pub fn require<'a, T>(value: &'a Option<T>, flag: &str) -> Result<&'a T, CliError> {
        value
            .as_ref()
            .ok_or_else(|| CliError::usage(format!("missing required --{flag}")))
    }
}
