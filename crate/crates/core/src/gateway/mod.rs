//! Client for OpenAI-compatible chat-completions endpoints.
//!
//! [`Gateway`] sends exactly one system and one user message per request,
//! retries transient failures (429, 5xx, timeouts, connection errors) with
//! exponential backoff, optionally caches replies on disk, and caps the
//! number of HTTP requests in flight with a semaphore. Pipeline stages talk
//! to it through the [`ChatClient`] trait so tests can substitute scripted
//! backends.

mod cache;
mod extract;
mod retry;

use std::path::PathBuf;
use std::sync::atomic::{AtomicU64, Ordering};
use std::time::{Duration, Instant};

use async_trait::async_trait;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;
use tokio::sync::Semaphore;

pub use cache::CacheHandle;
pub use extract::{extract_json, JsonExtractError};
pub use retry::RetryPolicy;

/// Environment variable holding the endpoint credential.
pub const API_KEY_ENV: &str = "MCQFORGE_API_KEY";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResponseFormat {
    Text,
    JsonObject,
}

/// A zero-shot request: one system message, one user message.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub model: String,
    pub system: String,
    pub user: String,
    pub temperature: f64,
    pub max_tokens: u32,
    pub response_format: ResponseFormat,
}

impl ChatRequest {
    pub fn validate(&self) -> Result<(), GatewayError> {
        let problem = if self.model.trim().is_empty() {
            Some("model is empty")
        } else if self.system.trim().is_empty() {
            Some("system message is empty")
        } else if self.user.trim().is_empty() {
            Some("user message is empty")
        } else if !(0.0..=2.0).contains(&self.temperature) {
            Some("temperature outside [0, 2]")
        } else if self.max_tokens == 0 {
            Some("max_tokens must be positive")
        } else {
            None
        };
        match problem {
            Some(p) => Err(GatewayError::InvalidRequest(p.to_string())),
            None => Ok(()),
        }
    }

    fn wire_body(&self) -> Value {
        json!({
            "model": self.model,
            "messages": [
                {"role": "system", "content": self.system},
                {"role": "user", "content": self.user},
            ],
            "temperature": self.temperature,
            "max_tokens": self.max_tokens,
            "response_format": {"type": self.response_format},
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatResponse {
    pub content: String,
    pub model: String,
    pub attempts: u32,
    pub from_cache: bool,
    pub latency_ms: u64,
}

#[derive(Debug, Error)]
pub enum GatewayError {
    #[error("gave up after {attempts} attempts: {last}")]
    TransientExhausted { attempts: u32, last: String },
    #[error("endpoint rejected credentials (HTTP {status})")]
    Auth { status: u16 },
    #[error("endpoint returned HTTP {status}: {body}")]
    Rejected { status: u16, body: String },
    #[error("malformed response: {0}")]
    MalformedResponse(String),
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("gateway configuration: {0}")]
    Config(String),
    #[error("cache I/O: {0}")]
    CacheIo(#[from] std::io::Error),
}

impl GatewayError {
    /// Errors that will recur for every request, as opposed to per-item failures.
    pub fn is_fatal(&self) -> bool {
        matches!(self, Self::Auth { .. } | Self::Config(_) | Self::CacheIo(_))
    }
}

/// Anything that can answer a chat request. `sample` selects a distinct
/// draw of an identical request; backends without memory may ignore it.
#[async_trait]
pub trait ChatClient: Send + Sync {
    async fn complete(&self, request: &ChatRequest, sample: u32) -> Result<ChatResponse, GatewayError>;
}

#[derive(Debug, Clone)]
pub struct GatewayConfig {
    /// Base URL up to and including the API version, e.g. `https://host/v1`.
    pub base_url: String,
    pub api_key: Option<String>,
    pub parallelism: usize,
    pub timeout: Duration,
    pub retry: RetryPolicy,
    pub cache_dir: Option<PathBuf>,
}

impl GatewayConfig {
    pub fn new(base_url: impl Into<String>) -> Self {
        Self {
            base_url: base_url.into(),
            api_key: None,
            parallelism: 4,
            timeout: Duration::from_secs(60),
            retry: RetryPolicy::default(),
            cache_dir: None,
        }
    }
}

enum Failure {
    Transient(String),
    Fatal(GatewayError),
}

pub struct Gateway {
    http: reqwest::Client,
    endpoint: url::Url,
    api_key: Option<String>,
    retry: RetryPolicy,
    limiter: Semaphore,
    parallelism: usize,
    cache: Option<CacheHandle>,
    http_requests: AtomicU64,
}

impl Gateway {
    pub fn new(config: GatewayConfig) -> Result<Self, GatewayError> {
        let base = config.base_url.trim_end_matches('/');
        let endpoint = url::Url::parse(&format!("{base}/chat/completions"))
            .map_err(|e| GatewayError::Config(format!("llm.base_url {:?}: {e}", config.base_url)))?;
        if !matches!(endpoint.scheme(), "http" | "https") {
            return Err(GatewayError::Config(format!(
                "llm.base_url must be http(s), got {:?}",
                config.base_url
            )));
        }
        if config.parallelism == 0 {
            return Err(GatewayError::Config("parallelism must be at least 1".into()));
        }
        if config.api_key.is_none() {
            tracing::warn!("{API_KEY_ENV} not set; sending requests without credentials");
        }
        let http = reqwest::Client::builder()
            .timeout(config.timeout)
            .build()
            .map_err(|e| GatewayError::Config(e.to_string()))?;
        let cache = config.cache_dir.map(CacheHandle::open).transpose()?;
        Ok(Self {
            http,
            endpoint,
            api_key: config.api_key,
            retry: config.retry,
            limiter: Semaphore::new(config.parallelism),
            parallelism: config.parallelism,
            cache,
            http_requests: AtomicU64::new(0),
        })
    }

    pub fn parallelism(&self) -> usize {
        self.parallelism
    }

    pub fn cache(&self) -> Option<&CacheHandle> {
        self.cache.as_ref()
    }

    /// HTTP requests issued so far (cache hits excluded).
    pub fn http_requests(&self) -> u64 {
        self.http_requests.load(Ordering::SeqCst)
    }

    /// Sends the request, retrying transient failures per the retry policy.
    pub async fn chat(&self, request: &ChatRequest) -> Result<ChatResponse, GatewayError> {
        request.validate()?;
        let started = Instant::now();
        let mut attempts = 0;
        loop {
            attempts += 1;
            let outcome = {
                let _permit = self.limiter.acquire().await.expect("semaphore never closed");
                self.send_once(request).await
            };
            match outcome {
                Ok((content, model)) => {
                    return Ok(ChatResponse {
                        content,
                        model,
                        attempts,
                        from_cache: false,
                        latency_ms: started.elapsed().as_millis() as u64,
                    })
                }
                Err(Failure::Transient(reason)) if attempts <= self.retry.max_retries => {
                    let delay = self.retry.delay(attempts);
                    tracing::warn!(attempts, ?delay, %reason, "transient failure, backing off");
                    tokio::time::sleep(delay).await;
                }
                Err(Failure::Transient(last)) => {
                    return Err(GatewayError::TransientExhausted { attempts, last })
                }
                Err(Failure::Fatal(e)) => return Err(e),
            }
        }
    }

    /// Like [`Gateway::chat`], but answers from `cache` when possible and
    /// stores fresh replies.
    pub async fn cached_chat(
        &self,
        request: &ChatRequest,
        cache: &CacheHandle,
    ) -> Result<ChatResponse, GatewayError> {
        self.cached_sample(request, cache, 0).await
    }

    async fn cached_sample(
        &self,
        request: &ChatRequest,
        cache: &CacheHandle,
        sample: u32,
    ) -> Result<ChatResponse, GatewayError> {
        request.validate()?;
        let started = Instant::now();
        let key = CacheHandle::key(request, sample);
        if let Some(content) = cache.load(&key) {
            return Ok(ChatResponse {
                content,
                model: request.model.clone(),
                attempts: 1,
                from_cache: true,
                latency_ms: started.elapsed().as_millis() as u64,
            });
        }
        let response = self.chat(request).await?;
        cache.store(&key, request, &response.content)?;
        Ok(response)
    }

    async fn send_once(&self, request: &ChatRequest) -> Result<(String, String), Failure> {
        self.http_requests.fetch_add(1, Ordering::SeqCst);
        let mut builder = self.http.post(self.endpoint.clone()).json(&request.wire_body());
        if let Some(key) = &self.api_key {
            builder = builder.bearer_auth(key);
        }
        let response = builder
            .send()
            .await
            .map_err(|e| Failure::Transient(e.to_string()))?;
        let status = response.status().as_u16();
        let body = response
            .text()
            .await
            .map_err(|e| Failure::Transient(e.to_string()))?;
        match status {
            200..=299 => parse_completion(&body, &request.model).map_err(Failure::Fatal),
            401 | 403 => Err(Failure::Fatal(GatewayError::Auth { status })),
            429 | 500..=599 => Err(Failure::Transient(format!("HTTP {status}"))),
            _ => Err(Failure::Fatal(GatewayError::Rejected {
                status,
                body: body.chars().take(200).collect(),
            })),
        }
    }
}

fn parse_completion(body: &str, requested_model: &str) -> Result<(String, String), GatewayError> {
    let value: Value = serde_json::from_str(body)
        .map_err(|e| GatewayError::MalformedResponse(format!("body is not JSON: {e}")))?;
    let content = value["choices"][0]["message"]["content"]
        .as_str()
        .ok_or_else(|| GatewayError::MalformedResponse("missing choices[0].message.content".into()))?;
    let model = value["model"].as_str().unwrap_or(requested_model);
    Ok((content.to_string(), model.to_string()))
}

#[async_trait]
impl ChatClient for Gateway {
    async fn complete(&self, request: &ChatRequest, sample: u32) -> Result<ChatResponse, GatewayError> {
        match &self.cache {
            Some(cache) => self.cached_sample(request, cache, sample).await,
            None => self.chat(request).await,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn request() -> ChatRequest {
        ChatRequest {
            model: "m".into(),
            system: "s".into(),
            user: "u".into(),
            temperature: 0.0,
            max_tokens: 16,
            response_format: ResponseFormat::Text,
        }
    }

    #[test]
    fn request_validation() {
        assert!(request().validate().is_ok());
        assert!(ChatRequest { system: " ".into(), ..request() }.validate().is_err());
        assert!(ChatRequest { user: "".into(), ..request() }.validate().is_err());
        assert!(ChatRequest { temperature: 2.5, ..request() }.validate().is_err());
        assert!(ChatRequest { temperature: 2.0, ..request() }.validate().is_ok());
        assert!(ChatRequest { max_tokens: 0, ..request() }.validate().is_err());
    }

    #[test]
    fn wire_shape() {
        let body = ChatRequest {
            response_format: ResponseFormat::JsonObject,
            ..request()
        }
        .wire_body();
        assert_eq!(body["messages"].as_array().unwrap().len(), 2);
        assert_eq!(body["messages"][0]["role"], "system");
        assert_eq!(body["messages"][1]["content"], "u");
        assert_eq!(body["response_format"]["type"], "json_object");
        assert_eq!(body["max_tokens"], 16);
    }

    #[test]
    fn completion_parsing() {
        let ok = r#"{"model":"gpt","choices":[{"message":{"role":"assistant","content":"B"}}]}"#;
        assert_eq!(parse_completion(ok, "m").unwrap(), ("B".into(), "gpt".into()));
        let missing = r#"{"choices":[{"message":{"role":"assistant"}}]}"#;
        assert!(matches!(
            parse_completion(missing, "m"),
            Err(GatewayError::MalformedResponse(_))
        ));
        assert!(parse_completion("<html>", "m").is_err());
    }

    #[test]
    fn config_errors() {
        assert!(matches!(
            Gateway::new(GatewayConfig::new("not a url")),
            Err(GatewayError::Config(_))
        ));
        assert!(matches!(
            Gateway::new(GatewayConfig::new("ftp://host/v1")),
            Err(GatewayError::Config(_))
        ));
        let mut cfg = GatewayConfig::new("http://localhost:1/v1");
        cfg.parallelism = 0;
        assert!(matches!(Gateway::new(cfg), Err(GatewayError::Config(_))));
    }
}
