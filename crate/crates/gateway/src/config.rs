use serde::{Deserialize, Serialize};

use crate::GatewayError;

/// Endpoint and model settings for one generation run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    /// Full chat-completions URL, e.g. `https://openrouter.ai/api/v1/chat/completions`.
    pub api_url: String,
    pub model_name: String,
    #[serde(default)]
    pub temperature: f64,
    /// Upstream provider to pin, sent as `provider.order`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provider_name: Option<String>,
    #[serde(default = "default_api_key_env")]
    pub api_key_env: String,
    #[serde(default = "default_max_concurrency")]
    pub max_concurrency: usize,
    #[serde(default = "default_max_retries")]
    pub max_retries: u32,
}

pub const DEFAULT_API_KEY_ENV: &str = "LEXAUDIT_API_KEY";

fn default_api_key_env() -> String {
    DEFAULT_API_KEY_ENV.to_string()
}

fn default_max_concurrency() -> usize {
    4
}

fn default_max_retries() -> u32 {
    3
}

impl ModelConfig {
    pub fn new(api_url: impl Into<String>, model_name: impl Into<String>) -> Self {
        Self {
            api_url: api_url.into(),
            model_name: model_name.into(),
            temperature: 0.0,
            provider_name: None,
            api_key_env: default_api_key_env(),
            max_concurrency: default_max_concurrency(),
            max_retries: default_max_retries(),
        }
    }

    pub fn validate(&self) -> Result<(), GatewayError> {
        let bad = |m: String| Err(GatewayError::Config(m));
        if !(self.temperature >= 0.0 && self.temperature.is_finite()) {
            return bad(format!("temperature {} must be finite and >= 0", self.temperature));
        }
        if self.max_concurrency == 0 {
            return bad("max_concurrency must be at least 1".into());
        }
        if self.model_name.is_empty() {
            return bad("model_name is empty".into());
        }
        if !(self.api_url.starts_with("http://") || self.api_url.starts_with("https://")) {
            return bad(format!("api_url '{}' is not an http(s) URL", self.api_url));
        }
        if self.api_key_env.is_empty() {
            return bad("api_key_env is empty".into());
        }
        Ok(())
    }

    /// Read the API key from the configured environment variable.
    pub fn api_key(&self) -> Result<String, GatewayError> {
        match std::env::var(&self.api_key_env) {
            Ok(key) if !key.is_empty() => Ok(key),
            _ => Err(GatewayError::MissingApiKey(self.api_key_env.clone())),
        }
    }
}
