//! Collect sentencing predictions from chat-completion endpoints.
//!
//! Every baseline document and counterfactual variant becomes one prompt.
//! Answers are cached by (model, temperature, prompt) so interrupted runs
//! resume where they stopped, and each request is appended to an audit log.

mod cache;
mod client;
mod config;
mod parse;
mod prompt;
mod run;
#[cfg(feature = "stub-server")]
pub mod stub;

use std::path::PathBuf;

pub use cache::{cache_key, load_cache, AuditEntry, CacheEntry, AUDIT_FILE, CACHE_FILE};
pub use client::{request_body, response_content};
pub use config::{ModelConfig, DEFAULT_API_KEY_ENV};
pub use parse::{parse_prediction, ParseFailure};
pub use prompt::{build_prompt, strict_prompt, DEFAULT_TEMPLATE, FACTS_PLACEHOLDER, STRICT_SUFFIX};
pub use run::{
    run_generation, run_generation_with_key, GenerationOptions, GenerationOutput, ProgressFn,
    RunStats,
};

#[derive(Debug, thiserror::Error)]
pub enum GatewayError {
    #[error("invalid model config: {0}")]
    Config(String),
    #[error("invalid prompt template: {0}")]
    Template(String),
    #[error("environment variable {0} is not set")]
    MissingApiKey(String),
    #[error("authentication rejected (HTTP {status}): {message}")]
    Auth { status: u16, message: String },
    #[error("endpoint {url} unreachable: every request in the first batch failed ({message})")]
    Unreachable { url: String, message: String },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}
