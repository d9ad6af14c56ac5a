//! Uniform interfaces to the external model services, with live HTTP
//! adapters and deterministic offline implementations.
//!
//! | service      | trait                    | offline implementations              |
//! |--------------|--------------------------|--------------------------------------|
//! | chat / MLLM  | [`ChatProvider`]         | [`ScriptedChat`], [`SimulatedModel`] |
//! | embeddings   | [`EmbeddingProvider`]    | [`HashEmbedder`]                     |
//! | ASR          | [`AsrProvider`]          | [`FixtureAsr`]                       |
//! | diarization  | [`DiarizationProvider`]  | [`FixtureDiarizer`]                  |
//! | detection    | [`DetectorProvider`]     | [`FixtureDetector`]                  |
//! | web search   | [`SearchProvider`]       | [`FixtureSearch`]                    |

mod config;
pub mod context;
mod digest;
mod fixture;
mod hash_embed;
mod limiter;
mod live;
pub mod reader;
mod scripted;
mod simulated;
mod template;

use std::fmt;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

pub use config::{ProviderConfig, ProviderKind, ProviderSet, ProvidersConfig};
pub use digest::{canonical_json, request_digest};
pub use fixture::{FixtureAsr, FixtureDetector, FixtureDiarizer, FixtureSearch};
pub use hash_embed::{hash_embedding, HashEmbedder};
pub use limiter::Limited;
pub use live::{
    resolve_image, Endpoint, LiveAsr, LiveChat, LiveDetector, LiveDiarizer, LiveEmbedder, LiveSearch, RetryPolicy,
};
pub use scripted::{Condition, Rule, Script, ScriptedChat};
pub use simulated::SimulatedModel;

use crate::video::{Detection, SpeakerTurn, Utterance};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProviderError {
    #[error("{provider}: timed out after {after_secs}s")]
    Timeout { provider: String, after_secs: f64 },

    #[error("{provider}: http failure{}: {message}", status.map(|s| format!(" ({s})")).unwrap_or_default())]
    Http { provider: String, status: Option<u16>, message: String },

    #[error("{provider}: no scripted response for request digest {digest}")]
    MissingScript { provider: String, digest: String },

    #[error("response violates the {contract} contract: {detail}")]
    ContractViolation { contract: ResponseContract, detail: String, raw: String },

    #[error("invalid provider input: {0}")]
    InvalidInput(String),

    #[error("provider not configured: {0}")]
    Unconfigured(String),

    #[error("fixture error: {0}")]
    Fixture(String),
}

impl ProviderError {
    /// Transport-level failures worth retrying.
    pub fn is_retryable(&self) -> bool {
        match self {
            ProviderError::Timeout { .. } => true,
            ProviderError::Http { status, .. } => match status {
                None => true,
                Some(code) => *code == 429 || *code >= 500,
            },
            _ => false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    System,
    User,
    Assistant,
}

impl Role {
    pub fn as_str(self) -> &'static str {
        match self {
            Role::System => "system",
            Role::User => "user",
            Role::Assistant => "assistant",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Message {
    pub role: Role,
    pub text: String,
}

impl Message {
    pub fn system(text: impl Into<String>) -> Self {
        Message { role: Role::System, text: text.into() }
    }

    pub fn user(text: impl Into<String>) -> Self {
        Message { role: Role::User, text: text.into() }
    }
}

/// The response shape a caller expects back from a chat provider.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResponseContract {
    FreeText,
    StructuredVerdict,
    StructuredPlan,
    StructuredCaption,
    StructuredWindow,
}

impl ResponseContract {
    pub fn name(self) -> &'static str {
        match self {
            ResponseContract::FreeText => "free_text",
            ResponseContract::StructuredVerdict => "structured_verdict",
            ResponseContract::StructuredPlan => "structured_plan",
            ResponseContract::StructuredCaption => "structured_caption",
            ResponseContract::StructuredWindow => "structured_window",
        }
    }

    /// Fields a structured response object must carry.
    pub fn required_fields(self) -> &'static [&'static str] {
        match self {
            ResponseContract::FreeText => &[],
            ResponseContract::StructuredVerdict => &["type"],
            ResponseContract::StructuredPlan => &["success"],
            ResponseContract::StructuredCaption => &["time", "location", "characters", "events", "details", "summary"],
            ResponseContract::StructuredWindow => &[],
        }
    }

    /// Checks the outer shape of a response. Field semantics are left to the
    /// caller's parser.
    pub fn check(self, raw: &str) -> Result<(), ProviderError> {
        let violation =
            |detail: String| ProviderError::ContractViolation { contract: self, detail, raw: raw.to_string() };
        if raw.trim().is_empty() {
            return Err(violation("empty response".into()));
        }
        if self == ResponseContract::FreeText {
            return Ok(());
        }
        let value: Value =
            serde_json::from_str(strip_code_fence(raw)).map_err(|e| violation(format!("not a JSON object: {e}")))?;
        let obj = value.as_object().ok_or_else(|| violation("not a JSON object".into()))?;
        for field in self.required_fields() {
            if !obj.contains_key(*field) {
                return Err(violation(format!("missing field {field:?}")));
            }
        }
        Ok(())
    }
}

impl fmt::Display for ResponseContract {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Removes a surrounding markdown code fence, which live models like to add.
pub fn strip_code_fence(raw: &str) -> &str {
    let t = raw.trim();
    if let Some(rest) = t.strip_prefix("```") {
        let rest = rest.trim_start_matches(|c: char| c.is_ascii_alphabetic());
        if let Some(body) = rest.trim_end().strip_suffix("```") {
            return body.trim();
        }
    }
    t
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub messages: Vec<Message>,
    /// Frame or image references. Live adapters resolve them to base64
    /// payloads at the transport boundary.
    #[serde(default)]
    pub images: Vec<String>,
    pub contract: ResponseContract,
    /// Machine-readable view of the prompt's inputs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub context: Option<Value>,
}

impl ChatRequest {
    pub fn new(messages: Vec<Message>, contract: ResponseContract) -> Self {
        ChatRequest { messages, images: Vec::new(), contract, context: None }
    }

    pub fn with_context(mut self, context: Value) -> Self {
        self.context = Some(context);
        self
    }

    pub fn with_images(mut self, images: Vec<String>) -> Self {
        self.images = images;
        self
    }

    pub fn validate(&self) -> Result<(), ProviderError> {
        if self.messages.is_empty() {
            return Err(ProviderError::InvalidInput("chat request needs at least one message".into()));
        }
        Ok(())
    }

    /// The `kind` tag of the structured context, if any.
    pub fn context_kind(&self) -> Option<&str> {
        self.context.as_ref()?.get("kind")?.as_str()
    }
}

/// Chat or multimodal LLM.
pub trait ChatProvider: Send + Sync {
    fn name(&self) -> &str;

    /// Produces the raw response text.
    fn complete(&self, req: &ChatRequest) -> Result<String, ProviderError>;

    /// Validates the request, completes it and checks the declared contract.
    fn chat(&self, req: &ChatRequest) -> Result<String, ProviderError> {
        req.validate()?;
        let text = self.complete(req)?;
        req.contract.check(&text)?;
        Ok(text)
    }
}

pub trait EmbeddingProvider: Send + Sync {
    fn name(&self) -> &str;
    fn dimension(&self) -> usize;
    /// Returns an L2-normalized vector of length [`Self::dimension`].
    fn embed(&self, text: &str) -> Result<Vec<f32>, ProviderError>;
}

/// Reference to the audio track of an ingested video.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AudioRef {
    pub video_id: String,
    #[serde(default)]
    pub path: Option<String>,
}

pub trait AsrProvider: Send + Sync {
    fn name(&self) -> &str;
    fn transcribe(&self, audio: &AudioRef) -> Result<Vec<Utterance>, ProviderError>;
}

pub trait DiarizationProvider: Send + Sync {
    fn name(&self) -> &str;
    fn diarize(&self, audio: &AudioRef) -> Result<Vec<SpeakerTurn>, ProviderError>;
}

/// Identifies one frame of one video.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameRef {
    pub video_id: String,
    pub timestamp: f64,
    #[serde(default)]
    pub image: Option<String>,
}

impl FrameRef {
    /// `video_id@HH:MM:SS(.fff)`
    pub fn key(&self) -> String {
        format!("{}@{}", self.video_id, crate::timecode::format_hms(self.timestamp))
    }

    /// Inverse of [`FrameRef::key`] (the image path is not recovered).
    pub fn parse_key(key: &str) -> Option<FrameRef> {
        let (video_id, ts) = key.rsplit_once('@')?;
        if video_id.is_empty() {
            return None;
        }
        let timestamp = crate::timecode::parse_timestamp_lenient(ts).ok()?;
        Some(FrameRef { video_id: video_id.to_string(), timestamp, image: None })
    }
}

/// Object and face detection.
pub trait DetectorProvider: Send + Sync {
    fn name(&self) -> &str;
    fn detect(&self, frame: &FrameRef) -> Result<Vec<Detection>, ProviderError>;
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchSnippet {
    pub title: String,
    pub snippet: String,
}

pub trait SearchProvider: Send + Sync {
    fn name(&self) -> &str;
    fn search(&self, query: &str) -> Result<Vec<SearchSnippet>, ProviderError>;
}
