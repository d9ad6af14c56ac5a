use serde_json::Value;

use super::{SceneCaption, Segment, UNKNOWN};
use crate::prompts;
use crate::providers::context::{FrameView, FramesContext, PromptContext};
use crate::providers::{
    strip_code_fence, ChatProvider, ChatRequest, FrameRef, Message, ProviderError, ResponseContract,
};
use crate::timecode::format_hms;

#[derive(Debug, Clone, PartialEq)]
pub struct CaptionOutcome {
    pub caption: SceneCaption,
    /// Set when the response could not be parsed and the caption only
    /// carries the raw text.
    pub warning: Option<String>,
}

fn text_field(obj: &serde_json::Map<String, Value>, key: &str) -> String {
    let s = match obj.get(key) {
        Some(Value::String(s)) => s.trim().to_string(),
        Some(Value::Array(items)) => items
            .iter()
            .map(|v| v.as_str().map(str::to_string).unwrap_or_else(|| v.to_string()))
            .collect::<Vec<_>>()
            .join(", "),
        Some(Value::Null) | None => String::new(),
        Some(other) => other.to_string(),
    };
    if s.is_empty() {
        UNKNOWN.to_string()
    } else {
        s
    }
}

/// Parses a six-field caption object. A bare string in `events` counts as
/// one event.
pub fn parse_caption(raw: &str) -> Result<SceneCaption, String> {
    let value: Value = serde_json::from_str(strip_code_fence(raw)).map_err(|e| e.to_string())?;
    let obj = value.as_object().ok_or("caption is not a JSON object")?;
    for key in ResponseContract::StructuredCaption.required_fields() {
        if !obj.contains_key(*key) {
            return Err(format!("caption lacks {key:?}"));
        }
    }
    let events = match &obj["events"] {
        Value::Array(items) => items
            .iter()
            .filter_map(|v| match v {
                Value::String(s) => Some(s.trim().to_string()),
                Value::Null => None,
                other => Some(other.to_string()),
            })
            .filter(|s| !s.is_empty())
            .collect(),
        Value::String(s) if !s.trim().is_empty() => vec![s.trim().to_string()],
        _ => Vec::new(),
    };
    Ok(SceneCaption {
        time_context: text_field(obj, "time"),
        location: text_field(obj, "location"),
        characters: text_field(obj, "characters"),
        events_chronological: events,
        scene_details: text_field(obj, "details"),
        summary: text_field(obj, "summary"),
    })
}

/// Asks the multimodal model for a structured caption of one segment.
/// Provider failures are returned; an unparseable reply becomes a caption
/// holding the raw text plus a warning.
pub fn caption_segment(
    video_id: &str,
    segment: &Segment,
    mllm: &dyn ChatProvider,
) -> Result<CaptionOutcome, ProviderError> {
    let views: Vec<FrameView> = segment.sampled_frames.iter().map(FrameView::of).collect();
    let text = prompts::fill(
        prompts::CAPTION,
        &[
            ("frame_count", views.len().to_string()),
            ("start", format_hms(segment.start_ts)),
            ("end", format_hms(segment.end_ts)),
            ("frames", prompts::frames_block(&views)),
            ("transcript", prompts::transcript_block(&segment.transcript)),
        ],
    );
    let images = segment
        .sampled_frames
        .iter()
        .map(|f| {
            f.annotated_ref.clone().or_else(|| f.image_ref.clone()).unwrap_or_else(|| {
                FrameRef { video_id: video_id.to_string(), timestamp: f.timestamp, image: None }.key()
            })
        })
        .collect();
    let ctx = PromptContext::Caption(FramesContext {
        video_id: video_id.to_string(),
        start: segment.start_ts,
        end: segment.end_ts,
        frames: views,
        transcript: segment.transcript.clone(),
        instruction: None,
    });
    let req = ChatRequest::new(vec![Message::user(text)], ResponseContract::StructuredCaption)
        .with_images(images)
        .with_context(ctx.to_value());
    let raw = match mllm.chat(&req) {
        Ok(raw) => raw,
        Err(ProviderError::ContractViolation { detail, raw, .. }) => {
            return Ok(CaptionOutcome {
                caption: SceneCaption::from_raw(&raw),
                warning: Some(format!("unparseable caption: {detail}")),
            })
        }
        Err(e) => return Err(e),
    };
    Ok(match parse_caption(&raw) {
        Ok(caption) => CaptionOutcome { caption, warning: None },
        Err(e) => {
            CaptionOutcome { caption: SceneCaption::from_raw(&raw), warning: Some(format!("unparseable caption: {e}")) }
        }
    })
}
