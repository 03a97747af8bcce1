//! Chat-with-image completion client with a remote and a replay backend.

mod remote;
mod replay;

use std::sync::{Arc, Condvar, Mutex};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::prompts::PromptVariant;

pub use remote::{RemoteBackend, RemoteConfig, API_KEY_ENV};
pub(crate) use remote::post_json_with_retry;
pub use replay::ReplayBackend;

pub const MAX_RETRIES_CAP: u32 = 5;
pub const DEFAULT_IN_FLIGHT: usize = 4;

/// Identifies which stored reply a replay backend should return.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ReplayTag {
    pub scenario_id: u32,
    pub variant: PromptVariant,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub system_text: String,
    pub user_text: String,
    pub image_ref: Option<String>,
    pub temperature: f64,
    pub max_retries: u32,
    pub timeout: Duration,
    pub tag: Option<ReplayTag>,
}

impl ChatRequest {
    pub fn new(system_text: impl Into<String>, user_text: impl Into<String>) -> Self {
        Self {
            system_text: system_text.into(),
            user_text: user_text.into(),
            image_ref: None,
            temperature: 0.0,
            max_retries: 2,
            timeout: Duration::from_secs(60),
            tag: None,
        }
    }

    pub fn with_image(mut self, image_ref: impl Into<String>) -> Self {
        self.image_ref = Some(image_ref.into());
        self
    }

    pub fn with_tag(mut self, scenario_id: u32, variant: PromptVariant) -> Self {
        self.tag = Some(ReplayTag {
            scenario_id,
            variant,
        });
        self
    }

    pub fn validate(&self) -> Result<(), GatewayError> {
        if !(self.temperature >= 0.0 && self.temperature.is_finite()) {
            return Err(GatewayError::InvalidRequest(format!(
                "temperature {} must be a finite value >= 0",
                self.temperature
            )));
        }
        if self.max_retries > MAX_RETRIES_CAP {
            return Err(GatewayError::InvalidRequest(format!(
                "max_retries {} exceeds {MAX_RETRIES_CAP}",
                self.max_retries
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    Remote,
    Replay,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatResponse {
    pub text: String,
    pub backend: BackendKind,
    pub latency: Duration,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GatewayError {
    #[error("request timed out after {attempts} attempt(s)")]
    Timeout { attempts: u32 },
    #[error("rate limited after {attempts} attempt(s)")]
    RateLimited { attempts: u32 },
    #[error("no replay fixture for scenario {scenario} ({variant})")]
    FixtureMissing { scenario: u32, variant: PromptVariant },
    #[error("transport error after {attempts} attempt(s): {message}")]
    Transport { attempts: u32, message: String },
    #[error("invalid request: {0}")]
    InvalidRequest(String),
}

pub trait ChatBackend: Send + Sync {
    fn kind(&self) -> BackendKind;
    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, GatewayError>;
}

#[derive(Debug, Default)]
struct Slots {
    in_flight: usize,
    peak: usize,
}

/// Counting semaphore bounding concurrent requests.
#[derive(Debug)]
struct Limiter {
    cap: usize,
    slots: Mutex<Slots>,
    freed: Condvar,
}

struct Permit<'a>(&'a Limiter);

impl Limiter {
    fn acquire(&self) -> Permit<'_> {
        let mut s = self.slots.lock().expect("limiter lock");
        while s.in_flight >= self.cap {
            s = self.freed.wait(s).expect("limiter lock");
        }
        s.in_flight += 1;
        s.peak = s.peak.max(s.in_flight);
        Permit(self)
    }
}

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        let mut s = self.0.slots.lock().expect("limiter lock");
        s.in_flight -= 1;
        self.0.freed.notify_one();
    }
}

/// Shareable front door over one backend with a cap on in-flight requests.
#[derive(Clone)]
pub struct Gateway {
    backend: Arc<dyn ChatBackend>,
    limiter: Arc<Limiter>,
}

impl Gateway {
    pub fn new(backend: impl ChatBackend + 'static) -> Self {
        Self::with_cap(backend, DEFAULT_IN_FLIGHT)
    }

    pub fn with_cap(backend: impl ChatBackend + 'static, cap: usize) -> Self {
        Self {
            backend: Arc::new(backend),
            limiter: Arc::new(Limiter {
                cap: cap.max(1),
                slots: Mutex::default(),
                freed: Condvar::new(),
            }),
        }
    }

    pub fn replay(root: crate::assets::DataRoot) -> Self {
        Self::new(ReplayBackend::new(root))
    }

    pub fn kind(&self) -> BackendKind {
        self.backend.kind()
    }

    pub fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, GatewayError> {
        request.validate()?;
        let _permit = self.limiter.acquire();
        self.backend.complete(request)
    }

    /// Highest number of simultaneous requests seen so far.
    pub fn peak_in_flight(&self) -> usize {
        self.limiter.slots.lock().expect("limiter lock").peak
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::atomic::{AtomicUsize, Ordering};
    use std::thread;

    struct Slow(AtomicUsize);

    impl ChatBackend for Slow {
        fn kind(&self) -> BackendKind {
            BackendKind::Replay
        }
        fn complete(&self, _: &ChatRequest) -> Result<ChatResponse, GatewayError> {
            self.0.fetch_add(1, Ordering::SeqCst);
            thread::sleep(Duration::from_millis(20));
            Ok(ChatResponse {
                text: "ok".into(),
                backend: BackendKind::Replay,
                latency: Duration::ZERO,
            })
        }
    }

    #[test]
    fn in_flight_cap_is_respected() {
        let gw = Gateway::with_cap(Slow(AtomicUsize::new(0)), 2);
        thread::scope(|s| {
            for _ in 0..8 {
                let gw = gw.clone();
                s.spawn(move || gw.complete(&ChatRequest::new("s", "u")).unwrap());
            }
        });
        assert!(gw.peak_in_flight() <= 2);
        assert!(gw.peak_in_flight() >= 1);
    }

    #[test]
    fn request_validation() {
        let mut r = ChatRequest::new("s", "u");
        assert!(r.validate().is_ok());
        r.temperature = -0.1;
        assert!(matches!(r.validate(), Err(GatewayError::InvalidRequest(_))));
        r.temperature = 0.0;
        r.max_retries = 6;
        assert!(matches!(r.validate(), Err(GatewayError::InvalidRequest(_))));
    }
}
