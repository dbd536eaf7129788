use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::backend::post_json;
use crate::error::BackendError;

/// A text-completion backend. Transient failures are allowed; callers retry.
pub trait LlmClient: Send + Sync {
    /// Model identifier, part of every cache key.
    fn model_id(&self) -> String;

    fn send(&self, prompt: &str, temperature: f64) -> Result<String, BackendError>;
}

#[derive(Serialize)]
struct LlmRequest<'a> {
    model: &'a str,
    temperature: f64,
    prompt: &'a str,
}

#[derive(Deserialize)]
struct LlmResponse {
    text: String,
}

/// JSON-over-HTTP backend: `{model, temperature, prompt}` -> `{text}`.
#[derive(Debug, Clone)]
pub struct HttpLlmClient {
    endpoint: String,
    api_key: Option<String>,
    model: String,
    timeout: Duration,
}

impl HttpLlmClient {
    pub fn new(endpoint: impl Into<String>, api_key: Option<String>, model: impl Into<String>) -> Self {
        Self {
            endpoint: endpoint.into(),
            api_key,
            model: model.into(),
            timeout: Duration::from_secs(120),
        }
    }

    pub fn with_timeout(mut self, timeout: Duration) -> Self {
        self.timeout = timeout;
        self
    }
}

impl LlmClient for HttpLlmClient {
    fn model_id(&self) -> String {
        self.model.clone()
    }

    fn send(&self, prompt: &str, temperature: f64) -> Result<String, BackendError> {
        let resp: LlmResponse = post_json(
            &self.endpoint,
            self.api_key.as_deref(),
            &LlmRequest {
                model: &self.model,
                temperature,
                prompt,
            },
            self.timeout,
        )?;
        Ok(resp.text)
    }
}
