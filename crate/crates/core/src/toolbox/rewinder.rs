//! Re-reads original frames inside a time window and asks the multimodal
//! model about them. This recovers details that the ten frames sampled per
//! segment at ingestion missed.

use std::sync::Arc;

use serde_json::{json, Map, Value};

use super::{timestamp_value, ArgKind, ArgSpec, Constraint, ToolFailure, ToolHandler, ToolOutput, ToolSpec};
use crate::prompts;
use crate::providers::context::{FrameView, FramesContext, PromptContext};
use crate::providers::{ChatProvider, ChatRequest, DetectorProvider, FrameRef, Message, ResponseContract};
use crate::task_tree::Artifact;
use crate::timecode::{format_hms, Span};
use crate::video::{annotate_frames, utterances_overlapping, AnnotationRenderer, Frame, VideoLibrary};

pub const DEFAULT_GRANULARITY: f64 = 1.0;

/// Stored frames further than this from a requested instant do not count.
const FRAME_TOLERANCE: f64 = 0.5;

const MAX_FRAMES: usize = 900;

#[derive(Debug, Clone, PartialEq)]
pub struct RewindRequest {
    pub video_id: String,
    pub t0: f64,
    pub t1: f64,
    pub instruction: String,
    /// Frames per second to resample.
    pub granularity: f64,
}

pub struct Rewinder {
    library: Arc<VideoLibrary>,
    mllm: Arc<dyn ChatProvider>,
    detector: Option<Arc<dyn DetectorProvider>>,
    renderer: Option<Arc<dyn AnnotationRenderer>>,
    default_granularity: f64,
}

impl Rewinder {
    pub fn new(library: Arc<VideoLibrary>, mllm: Arc<dyn ChatProvider>) -> Self {
        Rewinder { library, mllm, detector: None, renderer: None, default_granularity: DEFAULT_GRANULARITY }
    }

    pub fn with_detector(mut self, detector: Option<Arc<dyn DetectorProvider>>) -> Self {
        self.detector = detector;
        self
    }

    pub fn with_renderer(mut self, renderer: Option<Arc<dyn AnnotationRenderer>>) -> Self {
        self.renderer = renderer;
        self
    }

    pub fn with_granularity(mut self, fps: f64) -> Self {
        self.default_granularity = fps;
        self
    }

    fn resample(&self, frames: &[Frame], req: &RewindRequest) -> Result<Vec<Frame>, ToolFailure> {
        let steps = ((req.t1 - req.t0) * req.granularity + 1e-9).floor() as usize;
        if steps + 1 > MAX_FRAMES {
            return Err(ToolFailure::bad_args(format!("{} frames requested; the limit is {MAX_FRAMES}", steps + 1)));
        }
        let mut out: Vec<Frame> = Vec::with_capacity(steps + 1);
        for i in 0..=steps {
            let t = req.t0 + i as f64 / req.granularity;
            let idx = frames.partition_point(|f| f.timestamp < t);
            let candidates = [idx.checked_sub(1), Some(idx)];
            let nearest = candidates
                .iter()
                .flatten()
                .filter_map(|&j| frames.get(j))
                .min_by(|a, b| (a.timestamp - t).abs().total_cmp(&(b.timestamp - t).abs()))
                .filter(|f| (f.timestamp - t).abs() <= FRAME_TOLERANCE);
            let Some(frame) = nearest else {
                return Err(ToolFailure::environment(format!(
                    "no source frame of {} near {}",
                    req.video_id,
                    format_hms(t)
                )));
            };
            if out.last().is_none_or(|f| f.timestamp != frame.timestamp) {
                out.push(frame.clone());
            }
        }
        Ok(out)
    }

    pub fn rewind(&self, req: &RewindRequest) -> Result<ToolOutput, ToolFailure> {
        let source = self
            .library
            .get(&req.video_id)
            .ok_or_else(|| ToolFailure::bad_args(format!("video {:?} is not ingested", req.video_id)))?;
        if !(req.granularity > 0.0 && req.granularity.is_finite()) {
            return Err(ToolFailure::bad_args("granularity must be positive"));
        }
        if !(0.0 <= req.t0 && req.t0 < req.t1 && req.t1 <= source.duration) {
            return Err(ToolFailure::bad_args(format!(
                "span [{}, {}] must satisfy 0 <= t0 < t1 <= {}",
                req.t0, req.t1, source.duration
            )));
        }
        if req.instruction.trim().is_empty() {
            return Err(ToolFailure::bad_args("instruction must be non-empty"));
        }
        let frames = self.resample(&source.frames, req)?;
        let (frames, warnings) =
            annotate_frames(&req.video_id, frames, self.detector.as_deref(), self.renderer.as_deref());
        for w in warnings {
            tracing::warn!(at = w.timestamp, "{}", w.message);
        }
        let views: Vec<FrameView> = frames.iter().map(FrameView::of).collect();
        let transcript = utterances_overlapping(&source.transcript, Span { lo: req.t0, hi: req.t1 });
        let text = prompts::fill(
            prompts::REWIND,
            &[
                ("frame_count", views.len().to_string()),
                ("video_id", req.video_id.clone()),
                ("start", format_hms(req.t0)),
                ("end", format_hms(req.t1)),
                ("fps", req.granularity.to_string()),
                ("instruction", req.instruction.clone()),
                ("frames", prompts::frames_block(&views)),
                ("transcript", prompts::transcript_block(&transcript)),
            ],
        );
        let keys: Vec<String> = frames
            .iter()
            .map(|f| FrameRef { video_id: req.video_id.clone(), timestamp: f.timestamp, image: None }.key())
            .collect();
        let images: Vec<String> = frames
            .iter()
            .zip(&keys)
            .map(|(f, k)| f.annotated_ref.clone().or_else(|| f.image_ref.clone()).unwrap_or_else(|| k.clone()))
            .collect();
        let ctx = PromptContext::Rewind(FramesContext {
            video_id: req.video_id.clone(),
            start: req.t0,
            end: req.t1,
            frames: views,
            transcript,
            instruction: Some(req.instruction.clone()),
        });
        let chat = ChatRequest::new(vec![Message::user(text)], ResponseContract::FreeText)
            .with_images(images)
            .with_context(ctx.to_value());
        let answer =
            self.mllm.chat(&chat).map_err(|e| ToolFailure::upstream(format!("multimodal model failed: {e}")))?;
        Ok(ToolOutput {
            content: answer.trim().to_string(),
            artifacts: keys.into_iter().map(|k| Artifact { name: "frame".into(), reference: k }).collect(),
        })
    }

    fn request(&self, args: &Map<String, Value>) -> Result<RewindRequest, ToolFailure> {
        let time = |k: &str| timestamp_value(&args[k], false).map_err(|e| ToolFailure::bad_args(format!("{k}: {e}")));
        Ok(RewindRequest {
            video_id: args["video_id"].as_str().unwrap_or_default().to_string(),
            t0: time("t0")?,
            t1: time("t1")?,
            instruction: args["instruction"].as_str().unwrap_or_default().to_string(),
            granularity: args.get("granularity").and_then(Value::as_f64).unwrap_or(self.default_granularity),
        })
    }
}

impl ToolHandler for Rewinder {
    fn spec(&self) -> ToolSpec {
        ToolSpec {
            name: "rewinder".into(),
            description: "Re-reads the original frames of a video between two timestamps at a fine frame rate and answers an instruction about them. Use it for details that the segment captions may have missed.".into(),
            args: vec![
                ArgSpec::new("video_id", ArgKind::Identifier, true, Constraint::NonEmpty, "video to rewind"),
                ArgSpec::new("t0", ArgKind::Timestamp, true, Constraint::Range { min: Some(0.0), max: None }, "start, seconds or HH:MM:SS"),
                ArgSpec::new("t1", ArgKind::Timestamp, true, Constraint::Range { min: Some(0.0), max: None }, "end, seconds or HH:MM:SS"),
                ArgSpec::new("instruction", ArgKind::Text, true, Constraint::NonEmpty, "what to look for"),
                ArgSpec::new("granularity", ArgKind::Number, false, Constraint::Positive, "frames per second, default 1"),
            ],
        }
    }

    fn call(&self, args: &Map<String, Value>) -> Result<ToolOutput, ToolFailure> {
        self.rewind(&self.request(args)?)
    }

    fn time_bounds(&self, args: &Map<String, Value>) -> Option<(f64, f64)> {
        let id = args.get("video_id")?.as_str()?;
        self.library.get(id).map(|s| (0.0, s.duration))
    }
}

/// Arguments for a rewinder call, in the shape the agent emits.
pub fn rewind_args(video_id: &str, t0: f64, t1: f64, instruction: &str) -> Value {
    json!({"video_id": video_id, "t0": format_hms(t0), "t1": format_hms(t1), "instruction": instruction})
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::providers::SimulatedModel;
    use crate::toolbox::{FailureCategory, ToolCall, ToolRegistry};
    use crate::video::{EventScript, FrameRecord, SceneScript, SyntheticScript, VideoManifest};

    fn library() -> Arc<VideoLibrary> {
        let script = SyntheticScript {
            scenes: vec![
                SceneScript { t0: 0.0, t1: 240.0, location: "city street".into(), time_of_day: None, details: vec![] },
                SceneScript {
                    t0: 240.0,
                    t1: 300.0,
                    location: "office lobby".into(),
                    time_of_day: None,
                    details: vec![],
                },
            ],
            events: vec![EventScript { t0: 152.0, t1: 153.0, text: "A cigarette drops to the ground".into() }],
        };
        let manifest = VideoManifest {
            video_id: "v".into(),
            title: None,
            video_type: None,
            duration: 300.0,
            audio: None,
            frames: (0..=300)
                .map(|t| FrameRecord { timestamp: t as f64, feature: Some(vec![1.0, 0.0]), image: None })
                .collect(),
            transcript: vec![],
            faces: vec![],
            script: Some(script),
        };
        let mut lib = VideoLibrary::new();
        lib.insert(manifest.into_source(std::path::Path::new(".")).unwrap()).unwrap();
        Arc::new(lib)
    }

    fn registry() -> ToolRegistry {
        let mut r = ToolRegistry::new();
        r.register(Arc::new(Rewinder::new(library(), Arc::new(SimulatedModel::default())))).unwrap();
        r
    }

    #[test]
    fn finds_scene_change() {
        let out =
            registry().invoke(&ToolCall::new("rewinder", rewind_args("v", 238.0, 242.0, "identify any scene changes")));
        assert!(out.ok, "{out:?}");
        assert!(out.content.contains("city street") && out.content.contains("office lobby"));
        assert_eq!(out.artifacts.len(), 5);
        assert_eq!(out.artifacts[0].reference, "v@00:03:58");
    }

    #[test]
    fn one_fps_catches_a_one_second_event() {
        let out = registry()
            .invoke(&ToolCall::new("rewinder", rewind_args("v", 120.0, 160.0, "cigarette drops to the ground")));
        assert_eq!(out.content, "00:02:32: A cigarette drops to the ground");
    }

    #[test]
    fn unchanging_scene() {
        let out =
            registry().invoke(&ToolCall::new("rewinder", rewind_args("v", 10.0, 20.0, "identify any scene changes")));
        assert!(out.content.starts_with("No scene change"));
    }

    #[test]
    fn bad_spans() {
        let r = registry();
        let cat = |v: Value| r.invoke(&ToolCall::new("rewinder", v)).failure.unwrap().category;
        assert_eq!(cat(rewind_args("v", 50.0, 40.0, "x")), FailureCategory::BadArgs);
        assert_eq!(cat(rewind_args("v", 250.0, 400.0, "x")), FailureCategory::BadArgs);
        assert_eq!(cat(rewind_args("nope", 1.0, 2.0, "x")), FailureCategory::BadArgs);
    }
}
