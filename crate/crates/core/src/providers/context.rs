//! Machine-readable prompt contexts.
//!
//! Every prompt the system sends carries one of these alongside its text,
//! tagged by `kind`. Live adapters render it as JSON inside the user turn;
//! offline models read it directly.

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::store::RetrievalHit;
use crate::timecode::{format_hms, Span};
use crate::toolbox::ToolSpec;
use crate::video::{Annotation, Frame, Utterance, VisualContent};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameView {
    pub timestamp: f64,
    pub time: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub visual: Option<VisualContent>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub annotations: Vec<Annotation>,
}

impl FrameView {
    pub fn of(frame: &Frame) -> Self {
        FrameView {
            timestamp: frame.timestamp,
            time: format_hms(frame.timestamp),
            image: frame.annotated_ref.clone().or_else(|| frame.image_ref.clone()),
            visual: frame.visual.clone(),
            annotations: frame.annotations.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HitView {
    pub entry_id: String,
    pub video_id: String,
    pub start: f64,
    pub end: f64,
    pub start_hms: String,
    pub end_hms: String,
    pub score: f64,
    pub caption: String,
}

impl HitView {
    pub fn of(hit: &RetrievalHit) -> Self {
        let e = &hit.entry;
        HitView {
            entry_id: e.entry_id.clone(),
            video_id: e.video_id.clone(),
            start: e.start_ts,
            end: e.end_ts,
            start_hms: format_hms(e.start_ts),
            end_hms: format_hms(e.end_ts),
            score: hit.score,
            caption: e.caption_text.clone(),
        }
    }
}

/// Outcome of an earlier task, visible to later ones.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriorResult {
    pub task: String,
    pub status: String,
    pub content: String,
}

/// A passage an answering model may draw on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Doc {
    pub label: String,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub span: Option<Span>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailureNote {
    pub task: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentContext {
    pub task: String,
    pub query: String,
    #[serde(default)]
    pub video_id: Option<String>,
    #[serde(default)]
    pub parent_task: Option<String>,
    /// Why the task was judged too complex (divider prompts only).
    #[serde(default)]
    pub reason: Option<String>,
    #[serde(default)]
    pub filter: Option<Span>,
    pub hits: Vec<HitView>,
    /// Earlier siblings of this task, in order.
    pub siblings: Vec<PriorResult>,
    /// Earlier results visible from this task: those of ancestors' earlier
    /// siblings followed by its own earlier siblings.
    pub prior: Vec<PriorResult>,
    pub tools: Vec<ToolSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnswerContext {
    pub question: String,
    pub docs: Vec<Doc>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub failures: Vec<FailureNote>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FramesContext {
    pub video_id: String,
    pub start: f64,
    pub end: f64,
    pub frames: Vec<FrameView>,
    pub transcript: Vec<Utterance>,
    /// What to look for (rewinder prompts only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub instruction: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PromptContext {
    Caption(FramesContext),
    Rewind(FramesContext),
    Verdict(AgentContext),
    Plan(AgentContext),
    Answer(AnswerContext),
    Synthesis(AnswerContext),
    TimeWindow { query: String },
}

impl PromptContext {
    pub fn to_value(&self) -> Value {
        serde_json::to_value(self).expect("prompt contexts serialize")
    }

    pub fn from_value(value: &Value) -> Option<Self> {
        serde_json::from_value(value.clone()).ok()
    }
}
