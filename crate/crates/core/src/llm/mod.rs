//! Chat-completion providers.
//!
//! [`ChatProvider`] is the one seam between orchestration and a language
//! model. Implementations: [`HttpChatProvider`] (chat-completions wire
//! format), [`ScriptedProvider`] (ordered substring/hook rules) and the
//! brute-force [`crate::oracle::OracleProvider`]. [`CachedProvider`] and
//! [`ConcurrencyLimit`] wrap any of them.

mod cache;
mod http;
mod limit;
mod scripted;

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use cache::CachedProvider;
pub use http::{HttpChatProvider, RetryPolicy, TokenUsage, ENV_API_KEY, ENV_ENDPOINT};
pub use limit::ConcurrencyLimit;
pub use scripted::{Matcher, RuleSpec, ScriptedProvider, ScriptedRule};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChatRole {
    System,
    User,
    Assistant,
}

impl fmt::Display for ChatRole {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ChatRole::System => "system",
            ChatRole::User => "user",
            ChatRole::Assistant => "assistant",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: ChatRole,
    pub content: String,
}

impl ChatMessage {
    pub fn system(content: impl Into<String>) -> Self {
        Self {
            role: ChatRole::System,
            content: content.into(),
        }
    }

    pub fn user(content: impl Into<String>) -> Self {
        Self {
            role: ChatRole::User,
            content: content.into(),
        }
    }

    pub fn assistant(content: impl Into<String>) -> Self {
        Self {
            role: ChatRole::Assistant,
            content: content.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionRequest {
    pub model: String,
    pub messages: Vec<ChatMessage>,
    pub temperature: f32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_tokens: Option<u32>,
}

impl CompletionRequest {
    pub fn new(model: impl Into<String>, messages: Vec<ChatMessage>) -> Self {
        Self {
            model: model.into(),
            messages,
            temperature: 0.0,
            max_tokens: None,
        }
    }

    pub fn validate(&self) -> Result<(), LlmError> {
        if self.messages.is_empty() {
            return Err(LlmError::InvalidRequest("no messages".into()));
        }
        if let Some(i) = self.messages.iter().position(|m| m.content.trim().is_empty()) {
            return Err(LlmError::InvalidRequest(format!("message {i} is empty")));
        }
        if self.messages[1..].iter().any(|m| m.role == ChatRole::System) {
            return Err(LlmError::InvalidRequest("system message allowed only first".into()));
        }
        if !(self.temperature >= 0.0 && self.temperature.is_finite()) {
            return Err(LlmError::InvalidRequest(format!(
                "temperature {} out of range",
                self.temperature
            )));
        }
        if self.max_tokens == Some(0) {
            return Err(LlmError::InvalidRequest("max_tokens must be positive".into()));
        }
        Ok(())
    }

    /// Plain-text form used for rule matching, cache keys and traces.
    pub fn render(&self) -> String {
        self.messages
            .iter()
            .map(|m| format!("[{}]\n{}", m.role, m.content))
            .collect::<Vec<_>>()
            .join("\n\n")
    }
}

#[derive(Debug, Error)]
pub enum LlmError {
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("no scripted rule matches request starting {preview:?}")]
    Unmatched { preview: String },
    #[error("provider at {endpoint} returned HTTP {status} after {attempts} attempt(s)")]
    Status {
        endpoint: String,
        status: u16,
        attempts: u32,
    },
    #[error("transport error talking to {endpoint}: {message}")]
    Transport { endpoint: String, message: String },
    #[error("malformed provider response: {0}")]
    Protocol(String),
    #[error("provider configuration: {0}")]
    Config(String),
    #[error("cache file: {0}")]
    Cache(#[from] std::io::Error),
}

pub trait ChatProvider: Send + Sync {
    /// Returns the first candidate completion verbatim.
    fn complete(&self, request: &CompletionRequest) -> Result<String, LlmError>;
}

impl<P: ChatProvider + ?Sized> ChatProvider for &P {
    fn complete(&self, request: &CompletionRequest) -> Result<String, LlmError> {
        (**self).complete(request)
    }
}

impl<P: ChatProvider + ?Sized> ChatProvider for Arc<P> {
    fn complete(&self, request: &CompletionRequest) -> Result<String, LlmError> {
        (**self).complete(request)
    }
}

impl<P: ChatProvider + ?Sized> ChatProvider for Box<P> {
    fn complete(&self, request: &CompletionRequest) -> Result<String, LlmError> {
        (**self).complete(request)
    }
}

/// Request parameters shared by every call a reasoning run makes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSettings {
    pub model: String,
    pub temperature: f32,
    #[serde(default)]
    pub max_tokens: Option<u32>,
}

impl Default for ModelSettings {
    fn default() -> Self {
        Self {
            model: "gpt-3.5-turbo".to_string(),
            temperature: 0.0,
            max_tokens: None,
        }
    }
}

/// A prompt and the completion it produced, as recorded in traces.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Exchange {
    pub prompt: String,
    pub response: String,
}

/// A provider bound to model settings.
#[derive(Clone, Copy)]
pub struct LlmClient<'a> {
    provider: &'a dyn ChatProvider,
    settings: &'a ModelSettings,
}

impl<'a> LlmClient<'a> {
    pub fn new(provider: &'a dyn ChatProvider, settings: &'a ModelSettings) -> Self {
        Self { provider, settings }
    }

    pub fn request(&self, messages: Vec<ChatMessage>) -> CompletionRequest {
        CompletionRequest {
            model: self.settings.model.clone(),
            messages,
            temperature: self.settings.temperature,
            max_tokens: self.settings.max_tokens,
        }
    }

    pub fn ask(&self, messages: Vec<ChatMessage>) -> Result<Exchange, LlmError> {
        let request = self.request(messages);
        request.validate()?;
        let response = self.provider.complete(&request)?;
        Ok(Exchange {
            prompt: request.render(),
            response,
        })
    }
}
