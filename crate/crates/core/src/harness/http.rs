//! HTTP adapter for messages-style chat APIs.
//!
//! Request body sent to `POST {base_url}`:
//!
//! ```json
//! {"model": "...", "max_tokens": 4096, "temperature": 0.0,
//!  "system": "<system prompt>",
//!  "messages": [{"role": "user", "content": "<prompt>"}]}
//! ```
//!
//! The response must carry `content[0].text`, `usage.input_tokens` and
//! `usage.output_tokens`. Status mapping: 429 is `rate_limited`; 402 or a body
//! mentioning credit is `credit_exhausted`; 5xx and transport failures are
//! `network`; anything else, including unparseable bodies, is
//! `malformed_response`.
//!
//! Header values may contain `{api_key}`, replaced with the value of the
//! environment variable named by `api_key_env`. The key is never logged or
//! included in error messages.

use std::collections::BTreeMap;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::backend::{BackendError, ErrorKind, ModelBackend, ModelRequest, ModelResponse};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HttpBackendConfig {
    pub base_url: String,
    pub api_key_env: String,
    #[serde(default = "default_headers")]
    pub headers: BTreeMap<String, String>,
    #[serde(default = "default_timeout")]
    pub timeout_seconds: u64,
}

fn default_headers() -> BTreeMap<String, String> {
    BTreeMap::from([
        ("x-api-key".to_string(), "{api_key}".to_string()),
        ("anthropic-version".to_string(), "2023-06-01".to_string()),
    ])
}

fn default_timeout() -> u64 {
    120
}

pub struct HttpBackend {
    agent: ureq::Agent,
    url: String,
    headers: Vec<(String, String)>,
}

impl HttpBackend {
    /// Resolves the credential from the environment and prepares headers.
    pub fn new(config: &HttpBackendConfig) -> Result<Self> {
        let key = std::env::var(&config.api_key_env)
            .map_err(|_| Error::InvalidParameter(format!("environment variable {} is not set", config.api_key_env)))?;
        let headers = config
            .headers
            .iter()
            .map(|(k, v)| (k.clone(), v.replace("{api_key}", &key)))
            .collect();
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .timeout_global(Some(Duration::from_secs(config.timeout_seconds)))
            .build()
            .into();
        Ok(HttpBackend {
            agent,
            url: config.base_url.clone(),
            headers,
        })
    }
}

/// Maps a status code and body onto a result.
pub fn interpret_response(status: u16, body: &str) -> std::result::Result<ModelResponse, BackendError> {
    let lower = body.to_ascii_lowercase();
    if status == 429 {
        return Err(BackendError::new(ErrorKind::RateLimited, format!("HTTP {status}")));
    }
    if status == 402 || (status >= 400 && lower.contains("credit")) {
        return Err(BackendError::new(ErrorKind::CreditExhausted, format!("HTTP {status}")));
    }
    if status >= 500 {
        return Err(BackendError::new(ErrorKind::Network, format!("HTTP {status}")));
    }
    if !(200..300).contains(&status) {
        return Err(BackendError::new(
            ErrorKind::MalformedResponse,
            format!("HTTP {status}"),
        ));
    }
    let malformed = |what: &str| BackendError::new(ErrorKind::MalformedResponse, what.to_string());
    let v: Value = serde_json::from_str(body).map_err(|_| malformed("body is not JSON"))?;
    let text = v
        .pointer("/content/0/text")
        .and_then(Value::as_str)
        .ok_or_else(|| malformed("missing content[0].text"))?;
    let input_tokens = v
        .pointer("/usage/input_tokens")
        .and_then(Value::as_u64)
        .ok_or_else(|| malformed("missing usage.input_tokens"))?;
    let output_tokens = v
        .pointer("/usage/output_tokens")
        .and_then(Value::as_u64)
        .ok_or_else(|| malformed("missing usage.output_tokens"))?;
    Ok(ModelResponse {
        text: text.to_string(),
        input_tokens,
        output_tokens,
        simulated_latency_ms: None,
    })
}

impl ModelBackend for HttpBackend {
    fn respond(&self, request: &ModelRequest<'_>) -> std::result::Result<ModelResponse, BackendError> {
        let body = json!({
            "model": request.config.model_name,
            "max_tokens": request.config.max_output_tokens,
            "temperature": request.config.temperature,
            "system": request.system_prompt,
            "messages": [{"role": "user", "content": request.user_prompt}],
        });
        let mut req = self.agent.post(&self.url);
        for (k, v) in &self.headers {
            req = req.header(k.as_str(), v.as_str());
        }
        let mut resp = req
            .send_json(&body)
            .map_err(|e| BackendError::new(ErrorKind::Network, format!("transport: {}", transport_summary(&e))))?;
        let status = resp.status().as_u16();
        let text = resp
            .body_mut()
            .read_to_string()
            .map_err(|e| BackendError::new(ErrorKind::Network, format!("reading body: {}", transport_summary(&e))))?;
        interpret_response(status, &text)
    }
}

// ureq errors can echo request details; keep only the error class.
fn transport_summary(e: &ureq::Error) -> &'static str {
    match e {
        ureq::Error::Timeout(_) => "timeout",
        ureq::Error::HostNotFound => "host not found",
        ureq::Error::Io(_) => "i/o",
        ureq::Error::ConnectionFailed => "connection failed",
        _ => "request failed",
    }
}
