use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::promptkit::{RenderedInput, Segment};

/// Sampling parameters sent with each request.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenParams {
    pub max_tokens: u32,
    pub temperature: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub presence_penalty: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frequency_penalty: Option<f64>,
}

impl Default for GenParams {
    fn default() -> Self {
        Self::chat()
    }
}

impl GenParams {
    /// Settings used for chat-style models: 50 tokens at temperature 0.7,
    /// penalties left to the server default.
    pub fn chat() -> Self {
        Self {
            max_tokens: 50,
            temperature: 0.7,
            presence_penalty: None,
            frequency_penalty: None,
        }
    }

    /// Settings used for completion-style models: as [`GenParams::chat`]
    /// plus presence penalty 1.0 and frequency penalty 0.0.
    pub fn completion() -> Self {
        Self {
            presence_penalty: Some(1.0),
            frequency_penalty: Some(0.0),
            ..Self::chat()
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.max_tokens < 1 {
            return Err("max_tokens must be at least 1".into());
        }
        if self.temperature.is_nan() || self.temperature < 0.0 {
            return Err(format!("temperature must be >= 0, got {}", self.temperature));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AdapterError {
    #[error("endpoint unreachable: {0}")]
    EndpointUnreachable(String),
    #[error("rate limited")]
    RateLimited { retry_after: Option<Duration> },
    #[error("server error: HTTP {0}")]
    Server(u16),
    #[error("malformed response: {0}")]
    MalformedResponse(String),
    /// Non-retryable client-side rejection (4xx other than 429).
    #[error("request rejected: HTTP {0}: {1}")]
    Rejected(u16, String),
}

impl AdapterError {
    pub fn is_retryable(&self) -> bool {
        !matches!(self, AdapterError::Rejected(..))
    }
}

/// A text-generation backend for one model.
pub trait GenerationAdapter: Send + Sync {
    fn model_id(&self) -> &str;

    /// One request; returns the raw model text.
    fn complete(&self, input: &RenderedInput, params: &GenParams) -> Result<String, AdapterError>;
}

/// The context text embedded in a rendered input.
///
/// Segmented inputs carry it as the first text segment. For instructions
/// the template prefix and suffix are removed and the cue clause (the last
/// ` and the long prompt ` / ` and the short prompt `) is cut off.
pub fn context_of(input: &RenderedInput) -> &str {
    match input {
        RenderedInput::Segmented(segments) => segments
            .iter()
            .find_map(|s| match s {
                Segment::Text(t) => Some(t.as_str()),
                Segment::Marker(_) => None,
            })
            .unwrap_or(""),
        RenderedInput::Instruction(text) => {
            let body = text.strip_prefix("Given the context ").unwrap_or(text);
            let body = body.strip_suffix(", generate a Question").unwrap_or(body);
            let cut = [" and the long prompt ", " and the short prompt "]
                .iter()
                .filter_map(|m| body.rfind(m))
                .max();
            match cut {
                Some(i) => &body[..i],
                None => body,
            }
        }
    }
}

/// Offline adapter: answers `What is <first five context words>?`.
#[derive(Debug, Clone)]
pub struct MockAdapter {
    model_id: String,
}

impl MockAdapter {
    pub fn new(model_id: impl Into<String>) -> Self {
        Self {
            model_id: model_id.into(),
        }
    }

    pub fn answer(input: &RenderedInput) -> String {
        let head: Vec<&str> = context_of(input).split_whitespace().take(5).collect();
        format!("What is {}?", head.join(" "))
    }
}

impl Default for MockAdapter {
    fn default() -> Self {
        Self::new("mock-echo")
    }
}

impl GenerationAdapter for MockAdapter {
    fn model_id(&self) -> &str {
        &self.model_id
    }

    fn complete(&self, input: &RenderedInput, _params: &GenParams) -> Result<String, AdapterError> {
        Ok(Self::answer(input))
    }
}

/// Cleans raw model text: first non-blank line, surrounding whitespace and
/// quote characters removed.
pub fn postprocess(raw: &str) -> String {
    let line = raw.lines().map(str::trim).find(|l| !l.is_empty()).unwrap_or("");
    line.trim_matches(|c: char| c.is_whitespace() || matches!(c, '"' | '\'' | '`' | '“' | '”' | '‘' | '’'))
        .to_string()
}
