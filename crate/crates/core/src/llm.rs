//! Completion backends: an OpenAI-compatible chat endpoint and a seeded mock.
//!
//! The remote backend POSTs `{model, messages, temperature}` to
//! `<endpoint>/chat/completions` with a bearer token read from a named
//! environment variable. Rate limits, 5xx responses, timeouts and connection
//! failures are retried with exponential backoff and jitter; 401/403 fail
//! immediately.
//!
//! The mock backend needs no network. Its output is a SOAP-shaped text that is
//! a pure function of `(seed, request digest, run index)`.

use std::fmt;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::{Duration, Instant};

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::prompt::{Message, RenderedPrompt, Role};

#[derive(Debug, Error)]
pub enum LlmError {
    #[error("environment variable {0} holding the API key is not set")]
    MissingCredential(String),
    #[error("authentication rejected (HTTP {status})")]
    AuthError { status: u16 },
    #[error("rate limited; gave up after {attempts} attempts")]
    RateLimited { attempts: u32 },
    #[error("request timed out; gave up after {attempts} attempts")]
    Timeout { attempts: u32 },
    #[error("server error HTTP {status}; gave up after {attempts} attempts")]
    ServerError { status: u16, attempts: u32 },
    #[error("connection failed after {attempts} attempts: {message}")]
    Connection { attempts: u32, message: String },
    #[error("HTTP {status}: {body}")]
    Status { status: u16, body: String },
    #[error("malformed response: {0}")]
    MalformedResponse(String),
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("invalid backend configuration: {0}")]
    Config(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionRequest {
    pub model: String,
    pub messages: Vec<Message>,
    pub temperature: f64,
    pub max_output_tokens: Option<u32>,
    /// Distinguishes repeated runs of the same prompt.
    pub run_index: u32,
}

impl CompletionRequest {
    pub fn new(model: impl Into<String>, prompt: &RenderedPrompt, run_index: u32) -> Self {
        Self {
            model: model.into(),
            messages: prompt.messages.clone(),
            temperature: 0.0,
            max_output_tokens: None,
            run_index,
        }
    }

    pub fn validate(&self) -> Result<(), LlmError> {
        if self.messages.is_empty() {
            return Err(LlmError::InvalidRequest("no messages".into()));
        }
        if !(0.0..=2.0).contains(&self.temperature) {
            return Err(LlmError::InvalidRequest(format!(
                "temperature {} outside [0, 2]",
                self.temperature
            )));
        }
        if self.max_output_tokens == Some(0) {
            return Err(LlmError::InvalidRequest("max_output_tokens must be positive".into()));
        }
        Ok(())
    }

    pub fn digest(&self) -> String {
        request_digest(&self.messages)
    }

    /// Body sent to the chat-completions endpoint.
    pub fn wire_body(&self) -> serde_json::Value {
        let mut body = json!({
            "model": self.model,
            "messages": self.messages,
            "temperature": self.temperature,
        });
        if let Some(n) = self.max_output_tokens {
            body["max_tokens"] = json!(n);
        }
        body
    }
}

/// SHA-256 over the JSON encoding of the messages, hex encoded.
pub fn request_digest(messages: &[Message]) -> String {
    let bytes = serde_json::to_vec(messages).expect("messages serialize");
    hex::encode(Sha256::digest(&bytes))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionResponse {
    pub text: String,
    pub prompt_tokens: Option<u64>,
    pub completion_tokens: Option<u64>,
    pub latency: Duration,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    Remote,
    #[default]
    Mock,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    pub base_backoff_ms: u64,
    pub max_backoff_ms: u64,
    /// Each delay is stretched by a random factor in `[1, 1 + jitter)`; kept
    /// within `[0, 1]` so delays never shrink between attempts.
    pub jitter: f64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            max_attempts: 5,
            base_backoff_ms: 500,
            max_backoff_ms: 30_000,
            jitter: 0.5,
        }
    }
}

impl RetryPolicy {
    /// Delay before retry number `retry` (0-based), for a uniform draw `u` in
    /// `[0, 1)`.
    pub fn delay(&self, retry: u32, u: f64) -> Duration {
        let exp = self
            .base_backoff_ms
            .saturating_mul(1u64.checked_shl(retry.min(63)).unwrap_or(u64::MAX));
        let capped = exp.min(self.max_backoff_ms) as f64;
        let jitter = self.jitter.clamp(0.0, 1.0);
        Duration::from_secs_f64(capped * (1.0 + jitter * u.clamp(0.0, 1.0)) / 1000.0)
    }

    /// Full schedule of delays between attempts, made non-decreasing.
    pub fn schedule(&self, rng: &mut impl Rng) -> Vec<Duration> {
        let mut prev = Duration::ZERO;
        (0..self.max_attempts.saturating_sub(1))
            .map(|k| {
                prev = prev.max(self.delay(k, rng.random::<f64>()));
                prev
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BackendConfig {
    pub kind: BackendKind,
    pub model: String,
    /// Base URL; requests go to `<endpoint>/chat/completions`.
    pub endpoint: Option<String>,
    /// Name of the environment variable holding the API key.
    pub credential_env: Option<String>,
    pub timeout_secs: f64,
    pub retry: RetryPolicy,
    pub mock_seed: u64,
    pub temperature: f64,
    pub max_output_tokens: Option<u32>,
}

impl Default for BackendConfig {
    fn default() -> Self {
        Self {
            kind: BackendKind::Mock,
            model: "gpt-4".into(),
            endpoint: None,
            credential_env: Some("OPENAI_API_KEY".into()),
            timeout_secs: 120.0,
            retry: RetryPolicy::default(),
            mock_seed: 0,
            temperature: 0.0,
            max_output_tokens: None,
        }
    }
}

impl BackendConfig {
    pub fn mock(seed: u64) -> Self {
        Self {
            kind: BackendKind::Mock,
            mock_seed: seed,
            ..Self::default()
        }
    }

    pub fn remote(endpoint: impl Into<String>, credential_env: impl Into<String>) -> Self {
        Self {
            kind: BackendKind::Remote,
            endpoint: Some(endpoint.into()),
            credential_env: Some(credential_env.into()),
            ..Self::default()
        }
    }

    /// Request for one run of a rendered prompt, carrying this backend's
    /// model and sampling settings.
    pub fn request(&self, prompt: &RenderedPrompt, run_index: u32) -> CompletionRequest {
        CompletionRequest {
            temperature: self.temperature,
            max_output_tokens: self.max_output_tokens,
            ..CompletionRequest::new(&self.model, prompt, run_index)
        }
    }

    pub fn validate(&self) -> Result<(), LlmError> {
        if self.retry.max_attempts < 1 {
            return Err(LlmError::Config("retry.max_attempts must be at least 1".into()));
        }
        if !(0.0..=2.0).contains(&self.temperature) {
            return Err(LlmError::Config("temperature must lie in [0, 2]".into()));
        }
        if self.timeout_secs <= 0.0 {
            return Err(LlmError::Config("timeout_secs must be positive".into()));
        }
        if self.kind == BackendKind::Remote {
            if self.endpoint.as_deref().is_none_or(str::is_empty) {
                return Err(LlmError::Config("remote backend needs an endpoint".into()));
            }
            if self.credential_env.as_deref().is_none_or(str::is_empty) {
                return Err(LlmError::Config("remote backend needs credential_env".into()));
            }
        }
        Ok(())
    }
}

/// Remote OpenAI-compatible chat endpoint.
pub struct RemoteBackend {
    client: reqwest::Client,
    url: String,
    api_key: String,
    retry: RetryPolicy,
    attempts: AtomicUsize,
}

impl fmt::Debug for RemoteBackend {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("RemoteBackend")
            .field("url", &self.url)
            .field("api_key", &"<redacted>")
            .field("retry", &self.retry)
            .finish()
    }
}

enum Attempt {
    Done(CompletionResponse),
    Fatal(LlmError),
    Transient(Transient),
}

enum Transient {
    RateLimited,
    Timeout,
    Server(u16),
    Connection(String),
}

impl Transient {
    fn exhausted(self, attempts: u32) -> LlmError {
        match self {
            Transient::RateLimited => LlmError::RateLimited { attempts },
            Transient::Timeout => LlmError::Timeout { attempts },
            Transient::Server(status) => LlmError::ServerError { status, attempts },
            Transient::Connection(message) => LlmError::Connection { attempts, message },
        }
    }
}

#[derive(Deserialize)]
struct WireResponse {
    choices: Option<Vec<WireChoice>>,
    usage: Option<WireUsage>,
}

#[derive(Deserialize)]
struct WireChoice {
    message: Option<WireMessage>,
}

#[derive(Deserialize)]
struct WireMessage {
    content: Option<String>,
}

#[derive(Deserialize)]
struct WireUsage {
    prompt_tokens: Option<u64>,
    completion_tokens: Option<u64>,
}

impl RemoteBackend {
    pub fn new(config: &BackendConfig) -> Result<Self, LlmError> {
        config.validate()?;
        let var = config.credential_env.clone().unwrap_or_default();
        let api_key = std::env::var(&var)
            .ok()
            .filter(|v| !v.is_empty())
            .ok_or(LlmError::MissingCredential(var))?;
        let endpoint = config.endpoint.as_deref().unwrap_or_default();
        let client = reqwest::Client::builder()
            .timeout(Duration::from_secs_f64(config.timeout_secs))
            .build()
            .map_err(|e| LlmError::Config(e.to_string()))?;
        Ok(Self {
            client,
            url: format!("{}/chat/completions", endpoint.trim_end_matches('/')),
            api_key,
            retry: config.retry.clone(),
            attempts: AtomicUsize::new(0),
        })
    }

    /// HTTP attempts made so far, retries included.
    pub fn attempts(&self) -> usize {
        self.attempts.load(Ordering::SeqCst)
    }

    async fn attempt(&self, body: &serde_json::Value) -> Attempt {
        self.attempts.fetch_add(1, Ordering::SeqCst);
        let started = Instant::now();
        let resp = match self
            .client
            .post(&self.url)
            .bearer_auth(&self.api_key)
            .json(body)
            .send()
            .await
        {
            Ok(r) => r,
            Err(e) if e.is_timeout() => return Attempt::Transient(Transient::Timeout),
            Err(e) => return Attempt::Transient(Transient::Connection(e.to_string())),
        };

        let status = resp.status().as_u16();
        match status {
            401 | 403 => return Attempt::Fatal(LlmError::AuthError { status }),
            429 => return Attempt::Transient(Transient::RateLimited),
            500..=599 => return Attempt::Transient(Transient::Server(status)),
            200..=299 => {}
            _ => {
                let body = resp.text().await.unwrap_or_default();
                return Attempt::Fatal(LlmError::Status { status, body });
            }
        }

        let bytes = match resp.bytes().await {
            Ok(b) => b,
            Err(e) if e.is_timeout() => return Attempt::Transient(Transient::Timeout),
            Err(e) => return Attempt::Transient(Transient::Connection(e.to_string())),
        };
        let wire: WireResponse = match serde_json::from_slice(&bytes) {
            Ok(w) => w,
            Err(e) => return Attempt::Fatal(LlmError::MalformedResponse(e.to_string())),
        };
        let text = wire
            .choices
            .and_then(|c| c.into_iter().next())
            .and_then(|c| c.message)
            .and_then(|m| m.content);
        let Some(text) = text else {
            return Attempt::Fatal(LlmError::MalformedResponse(
                "missing choices[0].message.content".into(),
            ));
        };
        Attempt::Done(CompletionResponse {
            text,
            prompt_tokens: wire.usage.as_ref().and_then(|u| u.prompt_tokens),
            completion_tokens: wire.usage.as_ref().and_then(|u| u.completion_tokens),
            latency: started.elapsed(),
        })
    }

    pub async fn complete(&self, request: &CompletionRequest) -> Result<CompletionResponse, LlmError> {
        request.validate()?;
        let body = request.wire_body();
        let delays = self.retry.schedule(&mut rand::rng());
        let mut attempt_no = 0u32;
        loop {
            attempt_no += 1;
            match self.attempt(&body).await {
                Attempt::Done(r) => return Ok(r),
                Attempt::Fatal(e) => return Err(e),
                Attempt::Transient(t) => {
                    let Some(delay) = delays.get(attempt_no as usize - 1) else {
                        return Err(t.exhausted(attempt_no));
                    };
                    tracing::warn!(attempt = attempt_no, ?delay, "transient backend failure, retrying");
                    tokio::time::sleep(*delay).await;
                }
            }
        }
    }
}

const FALLBACK_WORDS: &[&str] = &[
    "patient", "complaints", "ear", "pain", "week", "discharge", "advice", "control",
];

/// Seeded offline backend producing SOAP-shaped text from words of the
/// final user message.
#[derive(Debug, Default)]
pub struct MockBackend {
    seed: u64,
    calls: AtomicUsize,
}

impl MockBackend {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            calls: AtomicUsize::new(0),
        }
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }

    fn rng(&self, request: &CompletionRequest) -> ChaCha8Rng {
        let mut h = Sha256::new();
        h.update(self.seed.to_le_bytes());
        h.update(request.digest().as_bytes());
        h.update(request.run_index.to_le_bytes());
        let mut seed = [0u8; 32];
        seed.copy_from_slice(&h.finalize());
        ChaCha8Rng::from_seed(seed)
    }

    /// Deterministic text for `request`; does not count as a call.
    pub fn generate(&self, request: &CompletionRequest) -> String {
        let source = request
            .messages
            .iter()
            .rev()
            .find(|m| m.role == Role::User)
            .map(|m| m.content.as_str())
            .unwrap_or_default();
        let words: Vec<&str> = source
            .split_whitespace()
            .map(|w| w.trim_matches(|c: char| !c.is_alphanumeric()))
            .filter(|w| !w.is_empty())
            .collect();
        let words: &[&str] = if words.is_empty() { FALLBACK_WORDS } else { &words };

        let mut rng = self.rng(request);
        let mut budget = request.max_output_tokens.map_or(usize::MAX, |n| n as usize);
        let ranges = [(25usize, 55usize), (10, 25), (3, 10), (15, 40)];
        let mut out = String::new();
        for (letter, (lo, hi)) in ['S', 'O', 'A', 'P'].into_iter().zip(ranges) {
            let n = rng.random_range(lo..=hi).min(budget);
            budget -= n;
            if !out.is_empty() {
                out.push('\n');
            }
            out.push(letter);
            out.push(':');
            for _ in 0..n {
                out.push(' ');
                out.push_str(words.choose(&mut rng).expect("non-empty word list"));
            }
        }
        if budget > 0 && rng.random_bool(0.1) {
            let n = rng.random_range(3..=8).min(budget);
            out.push_str("\nNB:");
            for _ in 0..n {
                out.push(' ');
                out.push_str(words.choose(&mut rng).expect("non-empty word list"));
            }
        }
        out
    }

    pub async fn complete(&self, request: &CompletionRequest) -> Result<CompletionResponse, LlmError> {
        request.validate()?;
        self.calls.fetch_add(1, Ordering::SeqCst);
        let started = Instant::now();
        let text = self.generate(request);
        Ok(CompletionResponse {
            completion_tokens: Some(text.split_whitespace().count() as u64),
            prompt_tokens: None,
            text,
            latency: started.elapsed(),
        })
    }
}

/// A configured backend; shareable across concurrent workers.
#[derive(Debug)]
pub enum Backend {
    Remote(RemoteBackend),
    Mock(MockBackend),
}

impl Backend {
    pub fn from_config(config: &BackendConfig) -> Result<Self, LlmError> {
        config.validate()?;
        Ok(match config.kind {
            BackendKind::Remote => Backend::Remote(RemoteBackend::new(config)?),
            BackendKind::Mock => Backend::Mock(MockBackend::new(config.mock_seed)),
        })
    }

    pub async fn complete(&self, request: &CompletionRequest) -> Result<CompletionResponse, LlmError> {
        match self {
            Backend::Remote(b) => b.complete(request).await,
            Backend::Mock(b) => b.complete(request).await,
        }
    }

    /// Backend calls made so far (HTTP attempts for the remote backend).
    pub fn calls(&self) -> usize {
        match self {
            Backend::Remote(b) => b.attempts(),
            Backend::Mock(b) => b.calls(),
        }
    }
}

/// One-shot convenience: build the backend from `config` and run `request`.
pub async fn complete(config: &BackendConfig, request: &CompletionRequest) -> Result<CompletionResponse, LlmError> {
    Backend::from_config(config)?.complete(request).await
}
