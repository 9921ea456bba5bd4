use std::fmt;
use std::sync::atomic::{AtomicUsize, Ordering};

use serde::{Deserialize, Serialize};

use crate::cost::PricingModel;

pub const DEFAULT_SYSTEM_PROMPT: &str =
    "You are a task execution assistant. Complete the following task instruction as accurately and completely as possible.";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InferenceConfig {
    pub model_name: String,
    pub temperature: f64,
    pub max_output_tokens: u32,
    pub system_prompt: String,
    pub rpm_limit: u32,
    pub retry_backoff_seconds: Vec<u64>,
    pub pricing: PricingModel,
}

impl Default for InferenceConfig {
    fn default() -> Self {
        InferenceConfig {
            model_name: "claude-sonnet-4-5-20250929".into(),
            temperature: 0.0,
            max_output_tokens: 4096,
            system_prompt: DEFAULT_SYSTEM_PROMPT.into(),
            rpm_limit: 60,
            retry_backoff_seconds: vec![5, 15, 60],
            pricing: PricingModel::default(),
        }
    }
}

/// Failure classes a backend may report. All are retried.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorKind {
    RateLimited,
    CreditExhausted,
    Network,
    MalformedResponse,
}

impl ErrorKind {
    pub fn name(self) -> &'static str {
        match self {
            ErrorKind::RateLimited => "rate_limited",
            ErrorKind::CreditExhausted => "credit_exhausted",
            ErrorKind::Network => "network",
            ErrorKind::MalformedResponse => "malformed_response",
        }
    }
}

impl fmt::Display for ErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BackendError {
    pub kind: ErrorKind,
    pub message: String,
}

impl BackendError {
    pub fn new(kind: ErrorKind, message: impl Into<String>) -> Self {
        BackendError {
            kind,
            message: message.into(),
        }
    }
}

impl fmt::Display for BackendError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.kind, self.message)
    }
}

impl std::error::Error for BackendError {}

/// One model call. `stimulus_id` and `realized_ratio` are metadata that
/// simulated backends use for seeding; network backends ignore them.
#[derive(Debug, Clone, Copy)]
pub struct ModelRequest<'a> {
    pub system_prompt: &'a str,
    pub user_prompt: &'a str,
    pub stimulus_id: &'a str,
    pub realized_ratio: f64,
    pub config: &'a InferenceConfig,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelResponse {
    pub text: String,
    pub input_tokens: u64,
    pub output_tokens: u64,
    /// Latency the backend modelled, if it is simulated. Real backends leave
    /// this empty and the harness measures wall time.
    pub simulated_latency_ms: Option<u64>,
}

pub trait ModelBackend: Send + Sync {
    fn respond(&self, request: &ModelRequest<'_>) -> Result<ModelResponse, BackendError>;
}

impl<B: ModelBackend + ?Sized> ModelBackend for &B {
    fn respond(&self, request: &ModelRequest<'_>) -> Result<ModelResponse, BackendError> {
        (**self).respond(request)
    }
}

impl<B: ModelBackend + ?Sized> ModelBackend for Box<B> {
    fn respond(&self, request: &ModelRequest<'_>) -> Result<ModelResponse, BackendError> {
        (**self).respond(request)
    }
}

/// Wraps a backend so that every call after the first `successful_calls`
/// fails with `kind`, mimicking an account running out of credit mid-run.
/// Calls are counted across all attempts, retries included.
pub struct CensoredBackend<B> {
    inner: B,
    successful_calls: usize,
    kind: ErrorKind,
    calls: AtomicUsize,
}

impl<B> CensoredBackend<B> {
    pub fn new(inner: B, successful_calls: usize) -> Self {
        CensoredBackend {
            inner,
            successful_calls,
            kind: ErrorKind::CreditExhausted,
            calls: AtomicUsize::new(0),
        }
    }

    pub fn with_kind(mut self, kind: ErrorKind) -> Self {
        self.kind = kind;
        self
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }
}

impl<B: ModelBackend> ModelBackend for CensoredBackend<B> {
    fn respond(&self, request: &ModelRequest<'_>) -> Result<ModelResponse, BackendError> {
        let index = self.calls.fetch_add(1, Ordering::SeqCst);
        if index >= self.successful_calls {
            return Err(BackendError::new(
                self.kind,
                format!("call {} refused: credit balance is too low", index + 1),
            ));
        }
        self.inner.respond(request)
    }
}
