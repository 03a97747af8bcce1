use std::path::{Path, PathBuf};
use std::thread;
use std::time::{Duration, Instant};

use base64::Engine;
use reqwest::blocking::Client;
use reqwest::StatusCode;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use tracing::{debug, warn};

use super::{BackendKind, ChatBackend, ChatRequest, ChatResponse, GatewayError};

/// Environment variable holding the bearer token for remote endpoints.
pub const API_KEY_ENV: &str = "ATOM_API_KEY";

fn default_backoff_ms() -> u64 {
    500
}

/// Endpoint settings; credentials are deliberately not part of it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RemoteConfig {
    /// Full URL of a chat-completions style endpoint.
    pub endpoint: String,
    pub model: String,
    /// Send images inline as base64 data URLs instead of passing the reference through.
    #[serde(default)]
    pub inline_images: bool,
    /// Directory that relative image references are resolved against.
    #[serde(default)]
    pub image_root: Option<PathBuf>,
    /// First backoff delay; doubles on every retry.
    #[serde(default = "default_backoff_ms")]
    pub backoff_ms: u64,
}

impl RemoteConfig {
    pub fn new(endpoint: impl Into<String>, model: impl Into<String>) -> Self {
        Self {
            endpoint: endpoint.into(),
            model: model.into(),
            inline_images: false,
            image_root: None,
            backoff_ms: default_backoff_ms(),
        }
    }
}

pub struct RemoteBackend {
    config: RemoteConfig,
    api_key: Option<String>,
    client: Client,
}

impl RemoteBackend {
    pub fn new(config: RemoteConfig, api_key: Option<String>) -> Result<Self, GatewayError> {
        let client = Client::builder()
            .build()
            .map_err(|e| GatewayError::InvalidRequest(format!("http client: {e}")))?;
        Ok(Self {
            config,
            api_key,
            client,
        })
    }

    /// Reads the key from [`API_KEY_ENV`].
    pub fn from_env(config: RemoteConfig) -> Result<Self, GatewayError> {
        let key = std::env::var(API_KEY_ENV).ok().filter(|k| !k.is_empty());
        if key.is_none() {
            warn!("{API_KEY_ENV} is not set; sending unauthenticated requests");
        }
        Self::new(config, key)
    }

    fn image_url(&self, image_ref: &str) -> Result<String, GatewayError> {
        if !self.config.inline_images {
            return Ok(image_ref.to_string());
        }
        let path = match &self.config.image_root {
            Some(root) => root.join(image_ref),
            None => PathBuf::from(image_ref),
        };
        let bytes = std::fs::read(&path).map_err(|e| {
            GatewayError::InvalidRequest(format!("image {}: {e}", path.display()))
        })?;
        let encoded = base64::engine::general_purpose::STANDARD.encode(bytes);
        Ok(format!("data:{};base64,{encoded}", mime_for(&path)))
    }

    /// Wire body: optional system message, then the user message carrying
    /// the optional image.
    pub fn request_body(&self, request: &ChatRequest) -> Result<Value, GatewayError> {
        let user = match &request.image_ref {
            Some(image) => json!([
                {"type": "text", "text": request.user_text},
                {"type": "image_url", "image_url": {"url": self.image_url(image)?}},
            ]),
            None => Value::String(request.user_text.clone()),
        };
        let mut messages = Vec::new();
        if !request.system_text.is_empty() {
            messages.push(json!({"role": "system", "content": request.system_text}));
        }
        messages.push(json!({"role": "user", "content": user}));
        Ok(json!({
            "model": self.config.model,
            "temperature": request.temperature,
            "messages": messages,
        }))
    }
}

fn mime_for(path: &Path) -> &'static str {
    match path
        .extension()
        .and_then(|e| e.to_str())
        .map(str::to_ascii_lowercase)
        .as_deref()
    {
        Some("png") => "image/png",
        Some("gif") => "image/gif",
        Some("webp") => "image/webp",
        _ => "image/jpeg",
    }
}

enum Failure {
    Timeout,
    RateLimited,
    Transport(String),
}

/// POSTs `body` and returns the decoded JSON reply. Makes `1 + max_retries`
/// attempts with exponential backoff on 429, 5xx, timeouts and connection
/// errors; other statuses fail immediately.
pub(crate) fn post_json_with_retry(
    client: &Client,
    url: &str,
    api_key: Option<&str>,
    body: &Value,
    timeout: Duration,
    max_retries: u32,
    backoff: Duration,
) -> Result<Value, GatewayError> {
    let total = 1 + max_retries;
    let mut last = Failure::Transport("no attempt made".into());
    for attempt in 1..=total {
        if attempt > 1 {
            let delay = backoff.saturating_mul(1 << (attempt - 2).min(16));
            debug!(attempt, ?delay, "retrying");
            thread::sleep(delay);
        }
        let mut rb = client.post(url).timeout(timeout).json(body);
        if let Some(key) = api_key {
            rb = rb.bearer_auth(key);
        }
        match rb.send() {
            Ok(resp) => {
                let status = resp.status();
                if status.is_success() {
                    return resp.json::<Value>().map_err(|e| GatewayError::Transport {
                        attempts: attempt,
                        message: format!("undecodable reply: {e}"),
                    });
                }
                if status == StatusCode::TOO_MANY_REQUESTS {
                    last = Failure::RateLimited;
                } else if status.is_server_error() {
                    last = Failure::Transport(format!("HTTP {status}"));
                } else {
                    return Err(GatewayError::Transport {
                        attempts: attempt,
                        message: format!("HTTP {status}"),
                    });
                }
            }
            Err(e) if e.is_timeout() => last = Failure::Timeout,
            Err(e) => last = Failure::Transport(e.to_string()),
        }
    }
    Err(match last {
        Failure::Timeout => GatewayError::Timeout { attempts: total },
        Failure::RateLimited => GatewayError::RateLimited { attempts: total },
        Failure::Transport(message) => GatewayError::Transport {
            attempts: total,
            message,
        },
    })
}

impl ChatBackend for RemoteBackend {
    fn kind(&self) -> BackendKind {
        BackendKind::Remote
    }

    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, GatewayError> {
        let body = self.request_body(request)?;
        let started = Instant::now();
        let reply = post_json_with_retry(
            &self.client,
            &self.config.endpoint,
            self.api_key.as_deref(),
            &body,
            request.timeout,
            request.max_retries,
            Duration::from_millis(self.config.backoff_ms),
        )?;
        let text = reply
            .pointer("/choices/0/message/content")
            .and_then(Value::as_str)
            .filter(|t| !t.trim().is_empty())
            .ok_or_else(|| GatewayError::Transport {
                attempts: 1,
                message: "reply has no message content".into(),
            })?;
        Ok(ChatResponse {
            text: text.to_string(),
            backend: BackendKind::Remote,
            latency: started.elapsed(),
        })
    }
}
