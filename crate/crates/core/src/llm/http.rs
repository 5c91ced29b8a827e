//! Chat-completions over HTTP with exponential-backoff retry.

use std::sync::Mutex;
use std::time::Duration;

use reqwest::blocking::Client;
use reqwest::header::{AUTHORIZATION, CONTENT_TYPE};
use serde::{Deserialize, Serialize};

use super::{ChatProvider, CompletionRequest, LlmError};

pub const ENV_ENDPOINT: &str = "DOG_LLM_ENDPOINT";
pub const ENV_API_KEY: &str = "DOG_LLM_API_KEY";

#[derive(Debug, Clone)]
pub struct RetryPolicy {
    /// Total attempts including the first; at least 1.
    pub max_attempts: u32,
    pub base_delay: Duration,
    pub max_delay: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            max_attempts: 5,
            base_delay: Duration::from_millis(500),
            max_delay: Duration::from_secs(20),
        }
    }
}

impl RetryPolicy {
    /// Delay before attempt `attempt + 1`.
    pub fn delay(&self, attempt: u32) -> Duration {
        let factor = 1u32.checked_shl(attempt.saturating_sub(1)).unwrap_or(u32::MAX);
        self.base_delay.saturating_mul(factor).min(self.max_delay)
    }
}

/// Recorded, never enforced.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct TokenUsage {
    pub requests: u64,
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<Choice>,
    #[serde(default)]
    usage: Option<Usage>,
}

#[derive(Deserialize)]
struct Choice {
    message: ResponseMessage,
}

#[derive(Deserialize)]
struct ResponseMessage {
    content: Option<String>,
}

#[derive(Deserialize)]
struct Usage {
    #[serde(default)]
    prompt_tokens: u64,
    #[serde(default)]
    completion_tokens: u64,
}

pub struct HttpChatProvider {
    endpoint: String,
    api_key: Option<String>,
    client: Client,
    retry: RetryPolicy,
    usage: Mutex<TokenUsage>,
}

impl HttpChatProvider {
    pub fn new(endpoint: impl Into<String>, api_key: Option<String>) -> Result<Self, LlmError> {
        let client = Client::builder()
            .timeout(Duration::from_secs(120))
            .build()
            .map_err(|e| LlmError::Config(e.to_string()))?;
        Ok(Self {
            endpoint: endpoint.into(),
            api_key,
            client,
            retry: RetryPolicy::default(),
            usage: Mutex::new(TokenUsage::default()),
        })
    }

    /// Reads `DOG_LLM_ENDPOINT` (required) and `DOG_LLM_API_KEY` (optional).
    pub fn from_env() -> Result<Self, LlmError> {
        let endpoint =
            std::env::var(ENV_ENDPOINT).map_err(|_| LlmError::Config(format!("{ENV_ENDPOINT} is not set")))?;
        Self::new(endpoint, std::env::var(ENV_API_KEY).ok())
    }

    pub fn with_retry(mut self, retry: RetryPolicy) -> Self {
        self.retry = retry;
        self
    }

    pub fn usage(&self) -> TokenUsage {
        self.usage.lock().map(|u| *u).unwrap_or_default()
    }

    fn record(&self, usage: Option<Usage>) {
        if let Ok(mut u) = self.usage.lock() {
            u.requests += 1;
            if let Some(usage) = usage {
                u.prompt_tokens += usage.prompt_tokens;
                u.completion_tokens += usage.completion_tokens;
            }
        }
    }
}

fn retriable(status: u16) -> bool {
    status == 429 || status >= 500
}

impl ChatProvider for HttpChatProvider {
    fn complete(&self, request: &CompletionRequest) -> Result<String, LlmError> {
        request.validate()?;
        let body = serde_json::to_vec(request).map_err(|e| LlmError::Protocol(e.to_string()))?;
        let attempts = self.retry.max_attempts.max(1);
        let mut last = None;
        for attempt in 1..=attempts {
            let mut builder = self
                .client
                .post(&self.endpoint)
                .header(CONTENT_TYPE, "application/json")
                .body(body.clone());
            if let Some(key) = &self.api_key {
                builder = builder.header(AUTHORIZATION, format!("Bearer {key}"));
            }
            match builder.send() {
                Ok(response) if response.status().is_success() => {
                    let text = response.text().map_err(|e| LlmError::Protocol(e.to_string()))?;
                    let parsed: ChatResponse =
                        serde_json::from_str(&text).map_err(|e| LlmError::Protocol(e.to_string()))?;
                    self.record(parsed.usage);
                    return parsed
                        .choices
                        .into_iter()
                        .next()
                        .and_then(|c| c.message.content)
                        .ok_or_else(|| LlmError::Protocol("no choices[0].message.content".into()));
                }
                Ok(response) => {
                    let status = response.status().as_u16();
                    let err = LlmError::Status {
                        endpoint: self.endpoint.clone(),
                        status,
                        attempts: attempt,
                    };
                    if !retriable(status) {
                        return Err(err);
                    }
                    log::warn!("chat endpoint returned {status}, attempt {attempt}/{attempts}");
                    last = Some(err);
                }
                Err(e) => {
                    log::warn!("chat endpoint transport error on attempt {attempt}/{attempts}: {e}");
                    last = Some(LlmError::Transport {
                        endpoint: self.endpoint.clone(),
                        message: e.to_string(),
                    });
                }
            }
            if attempt < attempts {
                std::thread::sleep(self.retry.delay(attempt));
            }
        }
        Err(last.expect("at least one attempt"))
    }
}
