use std::time::Duration;

use reqwest::blocking::Client;
use reqwest::StatusCode;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{AdapterError, GenParams, GenerationAdapter};
use crate::promptkit::RenderedInput;

/// Request shape understood by the endpoint.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ApiStyle {
    /// `POST {base}/chat/completions` with a single user message.
    #[default]
    Chat,
    /// `POST {base}/completions` with a bare prompt string.
    Completions,
}

#[derive(Debug, Clone)]
pub struct HttpAdapterConfig {
    pub base_url: String,
    pub model_id: String,
    pub style: ApiStyle,
    pub api_key: Option<String>,
    pub timeout: Duration,
}

/// Client for OpenAI-compatible generation endpoints.
#[derive(Debug, Clone)]
pub struct HttpAdapter {
    config: HttpAdapterConfig,
    client: Client,
}

impl HttpAdapter {
    pub fn new(config: HttpAdapterConfig) -> Result<Self, AdapterError> {
        let client = Client::builder()
            .timeout(config.timeout)
            .build()
            .map_err(|e| AdapterError::EndpointUnreachable(e.to_string()))?;
        Ok(Self { config, client })
    }

    /// Reads the API key from `key_env` when that variable is set.
    pub fn with_key_from_env(mut config: HttpAdapterConfig, key_env: &str) -> Result<Self, AdapterError> {
        if config.api_key.is_none() {
            config.api_key = std::env::var(key_env).ok().filter(|k| !k.is_empty());
        }
        Self::new(config)
    }

    pub fn endpoint(&self) -> String {
        let base = self.config.base_url.trim_end_matches('/');
        match self.config.style {
            ApiStyle::Chat => format!("{base}/chat/completions"),
            ApiStyle::Completions => format!("{base}/completions"),
        }
    }

    /// JSON body for one request. Penalties are only sent when set.
    pub fn request_body(&self, input: &RenderedInput, params: &GenParams) -> Value {
        let text = input.flatten();
        let mut body = match self.config.style {
            ApiStyle::Chat => json!({
                "model": self.config.model_id,
                "messages": [{ "role": "user", "content": text }],
            }),
            ApiStyle::Completions => json!({
                "model": self.config.model_id,
                "prompt": text,
            }),
        };
        let obj = body.as_object_mut().expect("object literal");
        obj.insert("max_tokens".into(), json!(params.max_tokens));
        obj.insert("temperature".into(), json!(params.temperature));
        if let Some(p) = params.presence_penalty {
            obj.insert("presence_penalty".into(), json!(p));
        }
        if let Some(f) = params.frequency_penalty {
            obj.insert("frequency_penalty".into(), json!(f));
        }
        body
    }

    fn extract_text(&self, body: &Value) -> Option<String> {
        let choice = body.get("choices")?.get(0)?;
        let text = match self.config.style {
            ApiStyle::Chat => choice.get("message")?.get("content")?,
            ApiStyle::Completions => choice.get("text")?,
        };
        text.as_str().map(str::to_string)
    }
}

fn retry_after(headers: &reqwest::header::HeaderMap) -> Option<Duration> {
    let raw = headers.get(reqwest::header::RETRY_AFTER)?.to_str().ok()?;
    raw.trim().parse::<f64>().ok().filter(|s| *s >= 0.0).map(Duration::from_secs_f64)
}

impl GenerationAdapter for HttpAdapter {
    fn model_id(&self) -> &str {
        &self.config.model_id
    }

    fn complete(&self, input: &RenderedInput, params: &GenParams) -> Result<String, AdapterError> {
        let mut request = self
            .client
            .post(self.endpoint())
            .json(&self.request_body(input, params));
        if let Some(key) = &self.config.api_key {
            request = request.bearer_auth(key);
        }
        let response = request
            .send()
            .map_err(|e| AdapterError::EndpointUnreachable(e.to_string()))?;
        let status = response.status();
        if status == StatusCode::TOO_MANY_REQUESTS {
            return Err(AdapterError::RateLimited {
                retry_after: retry_after(response.headers()),
            });
        }
        if status.is_server_error() {
            return Err(AdapterError::Server(status.as_u16()));
        }
        let text = response
            .text()
            .map_err(|e| AdapterError::MalformedResponse(e.to_string()))?;
        if !status.is_success() {
            return Err(AdapterError::Rejected(status.as_u16(), text));
        }
        let body: Value = serde_json::from_str(&text)
            .map_err(|e| AdapterError::MalformedResponse(e.to_string()))?;
        self.extract_text(&body)
            .ok_or_else(|| AdapterError::MalformedResponse("no choices[0] text".into()))
    }
}
