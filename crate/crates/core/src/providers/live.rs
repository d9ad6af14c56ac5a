//! Thin blocking HTTP adapters.
//!
//! Every service takes one JSON POST and answers with one JSON object; the
//! shapes are listed in the README. Transport failures are retried with
//! exponential backoff and always surface as [`ProviderError`] values.

use std::fs;
use std::path::Path;
use std::time::Duration;

use base64::engine::general_purpose::STANDARD;
use base64::Engine;
use serde_json::{json, Value};

use super::{
    AsrProvider, AudioRef, ChatProvider, ChatRequest, DetectorProvider, DiarizationProvider, EmbeddingProvider,
    FrameRef, ProviderError, SearchProvider, SearchSnippet,
};
use crate::video::{Detection, SpeakerTurn, Utterance};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RetryPolicy {
    pub max_retries: u32,
    pub base_delay: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy { max_retries: 2, base_delay: Duration::from_millis(500) }
    }
}

impl RetryPolicy {
    /// Delay before retry number `attempt` (1-based).
    pub fn delay(&self, attempt: u32) -> Duration {
        self.base_delay * 2u32.saturating_pow(attempt.saturating_sub(1))
    }
}

#[derive(Debug, Clone)]
pub struct Endpoint {
    pub name: String,
    pub url: Option<String>,
    pub key: Option<String>,
    pub timeout: Duration,
    pub retry: RetryPolicy,
}

fn env_name(name: &str) -> String {
    name.chars().map(|c| if c.is_ascii_alphanumeric() { c.to_ascii_uppercase() } else { '_' }).collect()
}

impl Endpoint {
    pub fn new(name: impl Into<String>, url: Option<String>) -> Self {
        Endpoint { name: name.into(), url, key: None, timeout: Duration::from_secs(60), retry: RetryPolicy::default() }
    }

    /// Reads `OM_PROVIDER_<NAME>_URL` and `OM_PROVIDER_<NAME>_KEY`.
    pub fn from_env(name: &str) -> Self {
        let prefix = format!("OM_PROVIDER_{}", env_name(name));
        let mut e = Endpoint::new(name, std::env::var(format!("{prefix}_URL")).ok());
        e.key = std::env::var(format!("{prefix}_KEY")).ok();
        e
    }

    fn agent(&self) -> ureq::Agent {
        ureq::Agent::config_builder().timeout_global(Some(self.timeout)).http_status_as_error(false).build().into()
    }

    fn once(&self, agent: &ureq::Agent, url: &str, body: &Value) -> Result<Value, ProviderError> {
        let mut req = agent.post(url);
        if let Some(key) = &self.key {
            req = req.header("Authorization", &format!("Bearer {key}"));
        }
        let mut resp = req.send_json(body).map_err(|e| self.transport(e))?;
        let status = resp.status().as_u16();
        let text = resp.body_mut().read_to_string().map_err(|e| self.transport(e))?;
        if !(200..300).contains(&status) {
            return Err(ProviderError::Http {
                provider: self.name.clone(),
                status: Some(status),
                message: text.chars().take(200).collect(),
            });
        }
        serde_json::from_str(&text).map_err(|e| ProviderError::Http {
            provider: self.name.clone(),
            status: Some(status),
            message: format!("response is not JSON: {e}"),
        })
    }

    fn transport(&self, e: ureq::Error) -> ProviderError {
        match e {
            ureq::Error::Timeout(_) => {
                ProviderError::Timeout { provider: self.name.clone(), after_secs: self.timeout.as_secs_f64() }
            }
            ureq::Error::StatusCode(code) => {
                ProviderError::Http { provider: self.name.clone(), status: Some(code), message: String::new() }
            }
            other => ProviderError::Http { provider: self.name.clone(), status: None, message: other.to_string() },
        }
    }

    pub fn post(&self, body: &Value) -> Result<Value, ProviderError> {
        let url = self
            .url
            .as_deref()
            .ok_or_else(|| ProviderError::Unconfigured(format!("{} has no endpoint URL", self.name)))?;
        let agent = self.agent();
        let mut attempt = 0;
        loop {
            match self.once(&agent, url, body) {
                Err(e) if e.is_retryable() && attempt < self.retry.max_retries => {
                    attempt += 1;
                    tracing::warn!(provider = %self.name, attempt, error = %e, "retrying");
                    std::thread::sleep(self.retry.delay(attempt));
                }
                other => return other,
            }
        }
    }

    fn malformed(&self, what: &str) -> ProviderError {
        ProviderError::Http {
            provider: self.name.clone(),
            status: Some(200),
            message: format!("response lacks {what}"),
        }
    }

    fn field<T: serde::de::DeserializeOwned>(&self, v: &Value, key: &str) -> Result<T, ProviderError> {
        v.get(key).cloned().and_then(|x| serde_json::from_value(x).ok()).ok_or_else(|| self.malformed(key))
    }
}

/// Local files become base64 data URLs; anything else is sent as given.
pub fn resolve_image(reference: &str) -> Value {
    let path = Path::new(reference);
    match fs::read(path) {
        Ok(bytes) => {
            let mime = match path.extension().and_then(|e| e.to_str()) {
                Some("jpg") | Some("jpeg") => "image/jpeg",
                _ => "image/png",
            };
            json!({"ref": reference, "data": format!("data:{mime};base64,{}", STANDARD.encode(bytes))})
        }
        Err(_) => json!({"ref": reference}),
    }
}

macro_rules! live_provider {
    ($name:ident) => {
        #[derive(Debug, Clone)]
        pub struct $name {
            pub endpoint: Endpoint,
        }

        impl $name {
            pub fn new(endpoint: Endpoint) -> Self {
                $name { endpoint }
            }
        }
    };
}

live_provider!(LiveChat);
live_provider!(LiveAsr);
live_provider!(LiveDiarizer);
live_provider!(LiveDetector);
live_provider!(LiveSearch);

impl ChatProvider for LiveChat {
    fn name(&self) -> &str {
        &self.endpoint.name
    }

    fn complete(&self, req: &ChatRequest) -> Result<String, ProviderError> {
        let messages: Vec<Value> =
            req.messages.iter().map(|m| json!({"role": m.role.as_str(), "content": m.text})).collect();
        let images: Vec<Value> = req.images.iter().map(|r| resolve_image(r)).collect();
        let body = json!({
            "messages": messages,
            "images": images,
            "response_format": req.contract.name(),
            "context": req.context,
        });
        let resp = self.endpoint.post(&body)?;
        resp.pointer("/choices/0/message/content")
            .or_else(|| resp.get("content"))
            .and_then(Value::as_str)
            .map(str::to_string)
            .ok_or_else(|| self.endpoint.malformed("choices[0].message.content"))
    }
}

#[derive(Debug, Clone)]
pub struct LiveEmbedder {
    pub endpoint: Endpoint,
    pub dim: usize,
}

impl LiveEmbedder {
    pub fn new(endpoint: Endpoint, dim: usize) -> Self {
        LiveEmbedder { endpoint, dim }
    }
}

impl EmbeddingProvider for LiveEmbedder {
    fn name(&self) -> &str {
        &self.endpoint.name
    }

    fn dimension(&self) -> usize {
        self.dim
    }

    fn embed(&self, text: &str) -> Result<Vec<f32>, ProviderError> {
        if text.trim().is_empty() {
            return Err(ProviderError::InvalidInput("cannot embed empty text".into()));
        }
        let resp = self.endpoint.post(&json!({"input": text}))?;
        let raw = resp
            .pointer("/data/0/embedding")
            .or_else(|| resp.get("embedding"))
            .cloned()
            .ok_or_else(|| self.endpoint.malformed("embedding"))?;
        let v: Vec<f64> = serde_json::from_value(raw).map_err(|_| self.endpoint.malformed("numeric embedding"))?;
        if v.len() != self.dim {
            return Err(ProviderError::InvalidInput(format!(
                "{} returned dimension {} (expected {})",
                self.endpoint.name,
                v.len(),
                self.dim
            )));
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if !(norm > 0.0 && norm.is_finite()) {
            return Err(self.endpoint.malformed("a non-zero finite embedding"));
        }
        Ok(v.into_iter().map(|x| (x / norm) as f32).collect())
    }
}

fn audio_body(audio: &AudioRef) -> Value {
    let data = audio.path.as_deref().and_then(|p| fs::read(p).ok()).map(|b| STANDARD.encode(b));
    json!({"video_id": audio.video_id, "path": audio.path, "audio": data})
}

impl AsrProvider for LiveAsr {
    fn name(&self) -> &str {
        &self.endpoint.name
    }

    fn transcribe(&self, audio: &AudioRef) -> Result<Vec<Utterance>, ProviderError> {
        let resp = self.endpoint.post(&audio_body(audio))?;
        self.endpoint.field(&resp, "utterances")
    }
}

impl DiarizationProvider for LiveDiarizer {
    fn name(&self) -> &str {
        &self.endpoint.name
    }

    fn diarize(&self, audio: &AudioRef) -> Result<Vec<SpeakerTurn>, ProviderError> {
        let resp = self.endpoint.post(&audio_body(audio))?;
        self.endpoint.field(&resp, "turns")
    }
}

impl DetectorProvider for LiveDetector {
    fn name(&self) -> &str {
        &self.endpoint.name
    }

    fn detect(&self, frame: &FrameRef) -> Result<Vec<Detection>, ProviderError> {
        let image = frame.image.as_deref().map(resolve_image);
        let resp = self.endpoint.post(&json!({"frame": frame.key(), "image": image}))?;
        self.endpoint.field(&resp, "detections")
    }
}

impl SearchProvider for LiveSearch {
    fn name(&self) -> &str {
        &self.endpoint.name
    }

    fn search(&self, query: &str) -> Result<Vec<SearchSnippet>, ProviderError> {
        let resp = self.endpoint.post(&json!({"query": query}))?;
        self.endpoint.field(&resp, "results")
    }
}
