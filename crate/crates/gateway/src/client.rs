//! OpenAI-style chat-completions over HTTP(S).

use std::time::Duration;

use serde_json::{json, Value};

use crate::{GatewayError, ModelConfig};

/// Classification of a failed request.
#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) enum FetchError {
    /// 401 or 403: the run cannot succeed.
    Auth { status: u16, message: String },
    /// Transport errors, 429 and 5xx.
    Retryable { status: Option<u16>, message: String },
    /// Other 4xx responses; retrying would repeat them.
    Rejected { status: u16, message: String },
}

impl FetchError {
    pub(crate) fn status(&self) -> Option<u16> {
        match self {
            FetchError::Auth { status, .. } | FetchError::Rejected { status, .. } => Some(*status),
            FetchError::Retryable { status, .. } => *status,
        }
    }

    pub(crate) fn message(&self) -> &str {
        match self {
            FetchError::Auth { message, .. }
            | FetchError::Retryable { message, .. }
            | FetchError::Rejected { message, .. } => message,
        }
    }
}

/// Request body sent for one prompt.
pub fn request_body(config: &ModelConfig, prompt: &str) -> Value {
    let mut body = json!({
        "model": config.model_name,
        "messages": [{"role": "user", "content": prompt}],
        "temperature": config.temperature,
    });
    if let Some(provider) = &config.provider_name {
        body["provider"] = json!({ "order": [provider] });
    }
    body
}

/// Assistant text of a chat-completions response, or the whole body when
/// it does not have that shape.
pub fn response_content(body: &str) -> String {
    serde_json::from_str::<Value>(body)
        .ok()
        .and_then(|v| {
            v.pointer("/choices/0/message/content")
                .and_then(Value::as_str)
                .map(str::to_string)
        })
        .unwrap_or_else(|| body.to_string())
}

pub(crate) struct ChatClient {
    http: reqwest::Client,
    url: String,
    api_key: String,
}

impl ChatClient {
    pub(crate) fn new(url: &str, api_key: &str, timeout: Duration) -> Result<Self, GatewayError> {
        let http = reqwest::Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| GatewayError::Config(format!("http client: {e}")))?;
        Ok(Self {
            http,
            url: url.to_string(),
            api_key: api_key.to_string(),
        })
    }

    /// One POST; returns the assistant text on 2xx.
    pub(crate) async fn send(&self, body: &Value) -> Result<String, FetchError> {
        let response = self
            .http
            .post(&self.url)
            .bearer_auth(&self.api_key)
            .json(body)
            .send()
            .await
            .map_err(|e| FetchError::Retryable {
                status: None,
                message: e.to_string(),
            })?;
        let status = response.status().as_u16();
        let text = response.text().await.map_err(|e| FetchError::Retryable {
            status: Some(status),
            message: e.to_string(),
        })?;
        match status {
            200..=299 => Ok(response_content(&text)),
            401 | 403 => Err(FetchError::Auth {
                status,
                message: text,
            }),
            429 | 500..=599 => Err(FetchError::Retryable {
                status: Some(status),
                message: text,
            }),
            _ => Err(FetchError::Rejected {
                status,
                message: text,
            }),
        }
    }
}
