//! Systems under test: the full agent and the two control groups.

use serde::{Deserialize, Serialize};

use super::dataset::EvalQuestion;
use crate::error::Result;
use crate::prompts;
use crate::providers::context::{AnswerContext, Doc, PromptContext};
use crate::providers::{
    ChatProvider, ChatRequest, DetectorProvider, EmbeddingProvider, FrameRef, Message, ResponseContract,
};
use crate::query::{extract_time_filter, retrieve, Pipeline, Query, DEFAULT_PAD};
use crate::store::{KnowledgeStore, TimeFilter, DEFAULT_K};
use crate::timecode::{format_hms, Span};
use crate::trace::{RetrievedRef, TraceDocument};
use crate::video::{annotate_frames, sample_frames, Frame, VideoLibrary};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Omagent,
    FramesStt,
    Video2rag,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Omagent => "omagent",
            Mode::FramesStt => "frames_stt",
            Mode::Video2rag => "video2rag",
        }
    }

    pub fn parse(s: &str) -> Option<Mode> {
        match s {
            "omagent" => Some(Mode::Omagent),
            "frames_stt" => Some(Mode::FramesStt),
            "video2rag" | "video2rag_only" => Some(Mode::Video2rag),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Answered {
    pub text: String,
    pub unanswered: bool,
    pub trace: Option<TraceDocument>,
}

pub trait Answerer: Sync {
    fn mode(&self) -> Mode;
    fn answer(&self, question: &EvalQuestion) -> Result<Answered>;
}

/// Retrieval, divide-and-conquer and synthesis.
pub struct OmAgent<'a> {
    pub pipeline: Pipeline<'a>,
    /// Search every video instead of the question's own.
    pub global: bool,
}

impl Answerer for OmAgent<'_> {
    fn mode(&self) -> Mode {
        Mode::Omagent
    }

    fn answer(&self, q: &EvalQuestion) -> Result<Answered> {
        let query = Query::new(q.prompt(), (!self.global).then(|| q.video_id.clone()))?;
        let out = self.pipeline.answer(query)?;
        Ok(Answered { text: out.text, unanswered: out.unanswered, trace: Some(out.trace) })
    }
}

pub const STT_FRAMES: usize = 20;

/// Evenly spaced frames of the whole video plus its full transcript, in
/// one multimodal request.
pub struct FramesStt<'a> {
    pub library: &'a VideoLibrary,
    pub mllm: &'a dyn ChatProvider,
    pub detector: Option<&'a dyn DetectorProvider>,
    pub frames: usize,
}

fn frame_line(f: &Frame) -> String {
    let mut parts = vec![format_hms(f.timestamp)];
    if let Some(v) = &f.visual {
        if let Some(loc) = &v.location {
            parts.push(format!("location: {loc}"));
        }
        if let Some(tod) = &v.time_of_day {
            parts.push(format!("time: {tod}"));
        }
        if !v.events.is_empty() {
            parts.push(format!("events: {}", v.events.join("; ")));
        }
        if !v.details.is_empty() {
            parts.push(format!("details: {}", v.details.join("; ")));
        }
    }
    let labels: Vec<&str> = f.annotations.iter().map(|a| a.label.as_str()).collect();
    if !labels.is_empty() {
        parts.push(format!("visible: {}", labels.join(", ")));
    }
    parts.join(" | ")
}

impl FramesStt<'_> {
    pub fn docs(&self, video_id: &str) -> Result<(Vec<Frame>, Vec<Doc>)> {
        let source = self.library.require(video_id)?;
        let sampled = sample_frames(Span { lo: 0.0, hi: source.duration }, &source.frames, self.frames)?;
        let (frames, _) = annotate_frames(video_id, sampled.frames, self.detector, None);
        let mut docs: Vec<Doc> = frames
            .iter()
            .map(|f| Doc {
                label: format!("frame {}", format_hms(f.timestamp)),
                text: frame_line(f),
                span: Some(Span { lo: f.timestamp, hi: f.timestamp }),
            })
            .collect();
        docs.extend(source.transcript.iter().map(|u| Doc {
            label: format!("speech {}", u.speaker),
            text: format!("{} says \"{}\"", u.speaker, u.text),
            span: Some(Span { lo: u.t0, hi: u.t1 }),
        }));
        Ok((frames, docs))
    }
}

impl Answerer for FramesStt<'_> {
    fn mode(&self) -> Mode {
        Mode::FramesStt
    }

    fn answer(&self, q: &EvalQuestion) -> Result<Answered> {
        let (frames, docs) = self.docs(&q.video_id)?;
        let images = frames
            .iter()
            .map(|f| {
                f.image_ref.clone().unwrap_or_else(|| {
                    FrameRef { video_id: q.video_id.clone(), timestamp: f.timestamp, image: None }.key()
                })
            })
            .collect();
        let question = q.prompt();
        let text =
            prompts::fill(prompts::ANSWER, &[("question", question.clone()), ("docs", prompts::docs_block(&docs))]);
        let ctx = PromptContext::Answer(AnswerContext { question, docs, failures: Vec::new() });
        let req = ChatRequest::new(vec![Message::user(text)], ResponseContract::FreeText)
            .with_images(images)
            .with_context(ctx.to_value());
        let answer = self.mllm.chat(&req)?.trim().to_string();
        Ok(Answered { text: answer, unanswered: false, trace: None })
    }
}

/// Filtered hybrid retrieval and a single answering call, without the
/// divide-and-conquer loop or tools.
pub struct Video2Rag<'a> {
    pub store: &'a KnowledgeStore,
    pub embedder: &'a dyn EmbeddingProvider,
    pub agent: &'a dyn ChatProvider,
    pub k: usize,
    pub pad: f64,
    pub global: bool,
}

impl<'a> Video2Rag<'a> {
    pub fn new(store: &'a KnowledgeStore, embedder: &'a dyn EmbeddingProvider, agent: &'a dyn ChatProvider) -> Self {
        Video2Rag { store, embedder, agent, k: DEFAULT_K, pad: DEFAULT_PAD, global: false }
    }
}

impl Answerer for Video2Rag<'_> {
    fn mode(&self) -> Mode {
        Mode::Video2rag
    }

    fn answer(&self, q: &EvalQuestion) -> Result<Answered> {
        let mut query = Query::new(q.prompt(), (!self.global).then(|| q.video_id.clone()))?;
        let window = extract_time_filter(&query.text, None, self.pad)?;
        query.extracted_filter = Some(TimeFilter { window, video_id: query.video_id.clone() });
        let mut notices = Vec::new();
        let hits = retrieve(self.store, self.embedder, &query, self.k, &mut notices)?;
        let docs: Vec<Doc> = hits
            .iter()
            .map(|h| Doc {
                label: h.entry.entry_id.clone(),
                text: h.entry.caption_text.clone(),
                span: Some(h.entry.span()),
            })
            .collect();
        let text =
            prompts::fill(prompts::ANSWER, &[("question", query.text.clone()), ("docs", prompts::docs_block(&docs))]);
        let ctx = PromptContext::Answer(AnswerContext { question: query.text.clone(), docs, failures: Vec::new() });
        let req = ChatRequest::new(vec![Message::user(text)], ResponseContract::FreeText).with_context(ctx.to_value());
        let answer = self.agent.chat(&req)?.trim().to_string();
        let trace = TraceDocument {
            query: query.text.clone(),
            video_id: query.video_id.clone(),
            filter: window,
            retrieved: hits
                .iter()
                .map(|h| RetrievedRef { entry_id: h.entry.entry_id.clone(), score: h.score, source: h.source })
                .collect(),
            notices,
            events: Vec::new(),
            tree: Vec::new(),
            answer: answer.clone(),
            unanswered: false,
        };
        Ok(Answered { text: answer, unanswered: false, trace: Some(trace) })
    }
}
