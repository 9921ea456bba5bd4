use std::collections::BTreeMap;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EmbeddingError {
    #[error("embedding provider rate limited")]
    RateLimited,
    #[error("embedding transport failure: {0}")]
    Network(String),
    #[error("malformed embedding response: {0}")]
    Malformed(String),
    #[error("embedding provider error: {0}")]
    Provider(String),
}

pub trait EmbeddingProvider: Send + Sync {
    /// Fixed length of every vector this provider returns.
    fn dimension(&self) -> usize;
    fn embed(&self, text: &str) -> std::result::Result<Vec<f32>, EmbeddingError>;
}

/// Embeddings endpoint speaking the common `{"model", "input"}` →
/// `{"data": [{"embedding": [...]}]}` shape.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HttpEmbeddingConfig {
    pub base_url: String,
    pub api_key_env: String,
    #[serde(default = "default_model")]
    pub model: String,
    #[serde(default = "default_dimension")]
    pub dimension: usize,
    #[serde(default = "default_headers")]
    pub headers: BTreeMap<String, String>,
    #[serde(default = "default_timeout")]
    pub timeout_seconds: u64,
}

fn default_model() -> String {
    "text-embedding-3-small".into()
}

fn default_dimension() -> usize {
    1536
}

fn default_headers() -> BTreeMap<String, String> {
    BTreeMap::from([("authorization".to_string(), "Bearer {api_key}".to_string())])
}

fn default_timeout() -> u64 {
    60
}

pub struct HttpEmbeddingProvider {
    agent: ureq::Agent,
    url: String,
    model: String,
    dimension: usize,
    headers: Vec<(String, String)>,
}

impl HttpEmbeddingProvider {
    pub fn new(config: &HttpEmbeddingConfig) -> Result<Self> {
        let key = std::env::var(&config.api_key_env)
            .map_err(|_| Error::InvalidParameter(format!("environment variable {} is not set", config.api_key_env)))?;
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .timeout_global(Some(Duration::from_secs(config.timeout_seconds)))
            .build()
            .into();
        Ok(HttpEmbeddingProvider {
            agent,
            url: config.base_url.clone(),
            model: config.model.clone(),
            dimension: config.dimension,
            headers: config
                .headers
                .iter()
                .map(|(k, v)| (k.clone(), v.replace("{api_key}", &key)))
                .collect(),
        })
    }
}

pub(crate) fn interpret_embedding(status: u16, body: &str) -> std::result::Result<Vec<f32>, EmbeddingError> {
    match status {
        429 => return Err(EmbeddingError::RateLimited),
        s if s >= 500 => return Err(EmbeddingError::Network(format!("HTTP {s}"))),
        s if !(200..300).contains(&s) => return Err(EmbeddingError::Provider(format!("HTTP {s}"))),
        _ => {}
    }
    let v: Value = serde_json::from_str(body).map_err(|_| EmbeddingError::Malformed("body is not JSON".into()))?;
    let arr = v
        .pointer("/data/0/embedding")
        .and_then(Value::as_array)
        .ok_or_else(|| EmbeddingError::Malformed("missing data[0].embedding".into()))?;
    arr.iter()
        .map(|x| x.as_f64().map(|f| f as f32))
        .collect::<Option<Vec<f32>>>()
        .ok_or_else(|| EmbeddingError::Malformed("non-numeric embedding component".into()))
}

impl EmbeddingProvider for HttpEmbeddingProvider {
    fn dimension(&self) -> usize {
        self.dimension
    }

    fn embed(&self, text: &str) -> std::result::Result<Vec<f32>, EmbeddingError> {
        let mut req = self.agent.post(&self.url);
        for (k, v) in &self.headers {
            req = req.header(k.as_str(), v.as_str());
        }
        let mut resp = req
            .send_json(json!({"model": self.model, "input": text}))
            .map_err(|_| EmbeddingError::Network("request failed".into()))?;
        let status = resp.status().as_u16();
        let body = resp
            .body_mut()
            .read_to_string()
            .map_err(|_| EmbeddingError::Network("reading body failed".into()))?;
        interpret_embedding(status, &body)
    }
}
