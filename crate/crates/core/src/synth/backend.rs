use std::collections::HashMap;
use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::abstraction::{AbstractionError, TokenCounter};

pub const KEY_ENV: &str = "FLAMES_BACKEND_KEY";

#[derive(Debug, Error)]
pub enum BackendError {
    #[error("backend transport error: {0}")]
    Transport(String),
    #[error("backend returned HTTP {status}: {body}")]
    Status { status: u16, body: String },
    #[error("backend response is not valid: {0}")]
    BadResponse(String),
    #[error("no recorded completion for sample `{0}`")]
    NoRecording(String),
    #[error("backend does not support token counting")]
    Unsupported,
}

/// One infill request. `sample_id` identifies the request to replaying
/// backends and is never sent over the wire.
#[derive(Debug, Clone, PartialEq)]
pub struct CompletionRequest {
    pub prompt: String,
    pub max_tokens: u32,
    pub stop: Vec<String>,
    pub temperature: f64,
    pub sample_id: Option<String>,
}

impl CompletionRequest {
    pub fn new(prompt: impl Into<String>) -> Self {
        Self {
            prompt: prompt.into(),
            max_tokens: 64,
            stop: default_stops(),
            temperature: 0.0,
            sample_id: None,
        }
    }

    pub fn with_id(mut self, id: impl Into<String>) -> Self {
        self.sample_id = Some(id.into());
        self
    }
}

pub fn default_stops() -> Vec<String> {
    [")", ";", "\n"].map(String::from).to_vec()
}

pub trait ModelBackend: Send + Sync {
    fn complete(&self, req: &CompletionRequest) -> Result<String, BackendError>;

    fn count_tokens(&self, _text: &str) -> Result<usize, BackendError> {
        Err(BackendError::Unsupported)
    }
}

/// Adapts a backend's tokenizer endpoint to budget checks.
pub struct BackendCounter<'a>(pub &'a dyn ModelBackend);

impl TokenCounter for BackendCounter<'_> {
    fn count(&self, text: &str) -> Result<usize, AbstractionError> {
        self.0
            .count_tokens(text)
            .map_err(|e| AbstractionError::BackendUnavailable(e.to_string()))
    }
}

/// Always answers with the same text.
#[derive(Debug, Clone)]
pub struct StaticBackend {
    pub completion: String,
}

impl StaticBackend {
    pub fn new(completion: impl Into<String>) -> Self {
        Self {
            completion: completion.into(),
        }
    }
}

impl ModelBackend for StaticBackend {
    fn complete(&self, _req: &CompletionRequest) -> Result<String, BackendError> {
        Ok(self.completion.clone())
    }
}

/// Serves recorded completions keyed by sample id.
#[derive(Debug, Clone, Default)]
pub struct ReplayBackend {
    pub recordings: HashMap<String, String>,
}

impl ReplayBackend {
    pub fn new(recordings: impl IntoIterator<Item = (String, String)>) -> Self {
        Self {
            recordings: recordings.into_iter().collect(),
        }
    }

    pub fn insert(&mut self, id: impl Into<String>, completion: impl Into<String>) {
        self.recordings.insert(id.into(), completion.into());
    }
}

impl ModelBackend for ReplayBackend {
    fn complete(&self, req: &CompletionRequest) -> Result<String, BackendError> {
        let id = req.sample_id.as_deref().unwrap_or_default();
        self.recordings
            .get(id)
            .cloned()
            .ok_or_else(|| BackendError::NoRecording(id.to_string()))
    }
}

/// Wraps a backend and keeps every prompt it is sent.
pub struct Recording<B> {
    pub inner: B,
    pub prompts: Mutex<Vec<CompletionRequest>>,
}

impl<B> Recording<B> {
    pub fn new(inner: B) -> Self {
        Self {
            inner,
            prompts: Mutex::new(Vec::new()),
        }
    }

    pub fn requests(&self) -> Vec<CompletionRequest> {
        self.prompts.lock().unwrap().clone()
    }
}

impl<B: ModelBackend> ModelBackend for Recording<B> {
    fn complete(&self, req: &CompletionRequest) -> Result<String, BackendError> {
        self.prompts.lock().unwrap().push(req.clone());
        self.inner.complete(req)
    }

    fn count_tokens(&self, text: &str) -> Result<usize, BackendError> {
        self.inner.count_tokens(text)
    }
}

#[derive(Serialize)]
struct InfillBody<'a> {
    prompt: &'a str,
    max_tokens: u32,
    stop: &'a [String],
    temperature: f64,
}

#[derive(Deserialize)]
struct InfillReply {
    completion: String,
}

#[derive(Serialize)]
struct CountBody<'a> {
    text: &'a str,
}

#[derive(Deserialize)]
struct CountReply {
    count: usize,
}

/// Client for a completion server speaking `POST /v1/infill` and
/// `POST /v1/count_tokens`.
#[derive(Debug, Clone)]
pub struct HttpBackend {
    pub base_url: String,
    pub api_key: Option<String>,
    pub timeout: Duration,
    /// Extra attempts after a transport error or 5xx/429 reply.
    pub retries: u32,
    pub backoff: Duration,
    agent: ureq::Agent,
}

impl HttpBackend {
    pub fn new(base_url: impl Into<String>) -> Self {
        Self::with_settings(base_url, std::env::var(KEY_ENV).ok(), Duration::from_secs(60), 2, Duration::from_millis(500))
    }

    pub fn with_settings(
        base_url: impl Into<String>,
        api_key: Option<String>,
        timeout: Duration,
        retries: u32,
        backoff: Duration,
    ) -> Self {
        let agent = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .timeout_global(Some(timeout))
            .build()
            .into();
        Self {
            base_url: base_url.into().trim_end_matches('/').to_string(),
            api_key,
            timeout,
            retries,
            backoff,
            agent,
        }
    }

    fn post<T: Serialize, R: for<'de> Deserialize<'de>>(&self, path: &str, body: &T) -> Result<R, BackendError> {
        let url = format!("{}{}", self.base_url, path);
        let payload = serde_json::to_string(body).map_err(|e| BackendError::BadResponse(e.to_string()))?;
        let mut attempt = 0;
        loop {
            let mut req = self.agent.post(&url).header("Content-Type", "application/json");
            if let Some(key) = &self.api_key {
                req = req.header("Authorization", &format!("Bearer {key}"));
            }
            let outcome = match req.send(payload.as_str()) {
                Ok(mut resp) => {
                    let status = resp.status().as_u16();
                    let text = resp
                        .body_mut()
                        .read_to_string()
                        .map_err(|e| BackendError::Transport(e.to_string()))?;
                    if (200..300).contains(&status) {
                        return serde_json::from_str(&text).map_err(|e| BackendError::BadResponse(e.to_string()));
                    }
                    BackendError::Status { status, body: text }
                }
                Err(e) => BackendError::Transport(e.to_string()),
            };
            let retryable = match &outcome {
                BackendError::Status { status, .. } => *status == 429 || *status >= 500,
                _ => true,
            };
            if !retryable || attempt >= self.retries {
                return Err(outcome);
            }
            attempt += 1;
            tracing::warn!(%url, attempt, error = %outcome, "retrying backend request");
            std::thread::sleep(self.backoff * attempt);
        }
    }
}

impl ModelBackend for HttpBackend {
    fn complete(&self, req: &CompletionRequest) -> Result<String, BackendError> {
        let body = InfillBody {
            prompt: &req.prompt,
            max_tokens: req.max_tokens,
            stop: &req.stop,
            temperature: req.temperature,
        };
        let reply: InfillReply = self.post("/v1/infill", &body)?;
        Ok(reply.completion)
    }

    fn count_tokens(&self, text: &str) -> Result<usize, BackendError> {
        let reply: CountReply = self.post("/v1/count_tokens", &CountBody { text })?;
        Ok(reply.count)
    }
}
