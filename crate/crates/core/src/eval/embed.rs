use std::time::Duration;

use reqwest::blocking::Client;
use serde_json::{json, Value};
use thiserror::Error;

use crate::gateway::{post_json_with_retry, API_KEY_ENV};

pub const LOCAL_DIM: usize = 384;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EmbedError {
    #[error("embedding provider: {0}")]
    Provider(String),
    #[error("embedding dimension {found} differs from {expected}")]
    DimensionMismatch { expected: usize, found: usize },
}

pub trait Embedder: Send + Sync {
    fn embed(&self, texts: &[&str]) -> Result<Vec<Vec<f64>>, EmbedError>;
}

/// Deterministic signed feature hashing over lowercased word tokens.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LocalHashEmbedder {
    pub dim: usize,
}

impl Default for LocalHashEmbedder {
    fn default() -> Self {
        Self { dim: LOCAL_DIM }
    }
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}

pub fn tokenize(text: &str) -> Vec<String> {
    text.to_lowercase()
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_string)
        .collect()
}

impl LocalHashEmbedder {
    pub fn embed_one(&self, text: &str) -> Result<Vec<f64>, EmbedError> {
        let mut v = vec![0.0; self.dim];
        for token in tokenize(text) {
            let h = fnv1a(token.as_bytes());
            let slot = (h % self.dim as u64) as usize;
            v[slot] += if h >> 63 == 0 { 1.0 } else { -1.0 };
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(EmbedError::Provider(format!("no embeddable tokens in {text:?}")));
        }
        v.iter_mut().for_each(|x| *x /= norm);
        Ok(v)
    }
}

impl Embedder for LocalHashEmbedder {
    fn embed(&self, texts: &[&str]) -> Result<Vec<Vec<f64>>, EmbedError> {
        texts.iter().map(|t| self.embed_one(t)).collect()
    }
}

/// Client for an OpenAI-style `/embeddings` endpoint.
pub struct RemoteEmbedder {
    endpoint: String,
    model: String,
    api_key: Option<String>,
    timeout: Duration,
    max_retries: u32,
    client: Client,
}

impl RemoteEmbedder {
    /// Reads the bearer token from the same environment variable as the chat gateway.
    pub fn from_env(endpoint: impl Into<String>, model: impl Into<String>) -> Result<Self, EmbedError> {
        let key = std::env::var(API_KEY_ENV).ok().filter(|k| !k.is_empty());
        Self::new(endpoint, model, key)
    }

    pub fn new(
        endpoint: impl Into<String>,
        model: impl Into<String>,
        api_key: Option<String>,
    ) -> Result<Self, EmbedError> {
        let client = Client::builder()
            .build()
            .map_err(|e| EmbedError::Provider(e.to_string()))?;
        Ok(Self {
            endpoint: endpoint.into(),
            model: model.into(),
            api_key,
            timeout: Duration::from_secs(60),
            max_retries: 2,
            client,
        })
    }
}

fn parse_embeddings(reply: &Value, expected: usize) -> Result<Vec<Vec<f64>>, EmbedError> {
    let data = reply
        .get("data")
        .and_then(Value::as_array)
        .ok_or_else(|| EmbedError::Provider("reply has no data array".into()))?;
    if data.len() != expected {
        return Err(EmbedError::Provider(format!(
            "{} embeddings for {expected} inputs",
            data.len()
        )));
    }
    let mut rows: Vec<(usize, Vec<f64>)> = Vec::with_capacity(data.len());
    for (pos, item) in data.iter().enumerate() {
        let index = item
            .get("index")
            .and_then(Value::as_u64)
            .map_or(pos, |i| i as usize);
        let vector = item
            .get("embedding")
            .and_then(Value::as_array)
            .ok_or_else(|| EmbedError::Provider(format!("item {pos} has no embedding")))?
            .iter()
            .map(|x| x.as_f64().ok_or_else(|| EmbedError::Provider("non-numeric embedding".into())))
            .collect::<Result<Vec<f64>, _>>()?;
        rows.push((index, vector));
    }
    rows.sort_by_key(|(i, _)| *i);
    let vectors: Vec<Vec<f64>> = rows.into_iter().map(|(_, v)| v).collect();
    uniform_dimension(&vectors)?;
    Ok(vectors)
}

impl Embedder for RemoteEmbedder {
    fn embed(&self, texts: &[&str]) -> Result<Vec<Vec<f64>>, EmbedError> {
        if texts.is_empty() {
            return Ok(Vec::new());
        }
        let body = json!({"model": self.model, "input": texts});
        let reply = post_json_with_retry(
            &self.client,
            &self.endpoint,
            self.api_key.as_deref(),
            &body,
            self.timeout,
            self.max_retries,
            Duration::from_millis(500),
        )
        .map_err(|e| EmbedError::Provider(e.to_string()))?;
        parse_embeddings(&reply, texts.len())
    }
}

/// Common dimension of a corpus, or the first offending row.
pub fn uniform_dimension<T>(vectors: &[Vec<T>]) -> Result<usize, EmbedError> {
    let Some(first) = vectors.first() else {
        return Ok(0);
    };
    let expected = first.len();
    match vectors.iter().find(|v| v.len() != expected) {
        Some(v) => Err(EmbedError::DimensionMismatch {
            expected,
            found: v.len(),
        }),
        None => Ok(expected),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn local_is_deterministic_and_unit() {
        let e = LocalHashEmbedder::default();
        let a = e.embed_one("abc").unwrap();
        assert_eq!(a, e.embed_one("abc").unwrap());
        assert_eq!(a.len(), LOCAL_DIM);
        for text in ["Bring the water bottle", "Dim the LAMP, please", "递水"] {
            let v = e.embed_one(text).unwrap();
            let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            assert!((n - 1.0).abs() < 1e-9);
        }
        assert_eq!(e.embed_one("ABC").unwrap(), a);
    }

    #[test]
    fn empty_text_is_rejected() {
        let e = LocalHashEmbedder::default();
        assert!(matches!(e.embed_one(""), Err(EmbedError::Provider(_))));
        assert!(matches!(e.embed_one(" ,. "), Err(EmbedError::Provider(_))));
    }

    #[test]
    fn remote_reply_is_reordered_by_index() {
        let reply = json!({"data": [
            {"index": 1, "embedding": [0.0, 1.0]},
            {"index": 0, "embedding": [1.0, 0.0]},
        ]});
        assert_eq!(parse_embeddings(&reply, 2).unwrap(), [vec![1.0, 0.0], vec![0.0, 1.0]]);
        let ragged = json!({"data": [{"embedding": [1.0]}, {"embedding": [1.0, 2.0]}]});
        assert_eq!(
            parse_embeddings(&ragged, 2),
            Err(EmbedError::DimensionMismatch { expected: 1, found: 2 })
        );
    }
}
