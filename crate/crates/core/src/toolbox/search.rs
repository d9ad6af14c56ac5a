use std::sync::Arc;

use serde_json::{json, Map, Value};

use super::{ArgKind, ArgSpec, Constraint, ToolFailure, ToolHandler, ToolOutput, ToolSpec};
use crate::providers::{DetectorProvider, FrameRef, SearchProvider};
use crate::task_tree::Artifact;
use crate::video::VideoLibrary;

/// Internet search through the configured provider. Without one every call
/// is an upstream failure.
pub struct WebSearch {
    provider: Option<Arc<dyn SearchProvider>>,
}

impl WebSearch {
    pub fn new(provider: Option<Arc<dyn SearchProvider>>) -> Self {
        WebSearch { provider }
    }
}

impl ToolHandler for WebSearch {
    fn spec(&self) -> ToolSpec {
        ToolSpec {
            name: "web_search".into(),
            description: "Searches the internet and returns ranked text snippets.".into(),
            args: vec![ArgSpec::new("query", ArgKind::Text, true, Constraint::NonEmpty, "search terms")],
        }
    }

    fn call(&self, args: &Map<String, Value>) -> Result<ToolOutput, ToolFailure> {
        let provider =
            self.provider.as_ref().ok_or_else(|| ToolFailure::upstream("no search provider is configured"))?;
        let query = args["query"].as_str().unwrap_or_default();
        let results = provider.search(query).map_err(|e| ToolFailure::upstream(e.to_string()))?;
        let content = if results.is_empty() {
            format!("No results for {query:?}.")
        } else {
            results
                .iter()
                .enumerate()
                .map(|(i, r)| format!("{}. {}: {}", i + 1, r.title, r.snippet))
                .collect::<Vec<_>>()
                .join("\n")
        };
        Ok(ToolOutput { content, artifacts: Vec::new() })
    }
}

/// Faces in one stored frame, as `{box, label, confidence}` records.
pub struct FaceRecognition {
    library: Arc<VideoLibrary>,
    detector: Option<Arc<dyn DetectorProvider>>,
}

impl FaceRecognition {
    pub fn new(library: Arc<VideoLibrary>, detector: Option<Arc<dyn DetectorProvider>>) -> Self {
        FaceRecognition { library, detector }
    }
}

impl ToolHandler for FaceRecognition {
    fn spec(&self) -> ToolSpec {
        ToolSpec {
            name: "face_recognition".into(),
            description: "Lists the recognized faces in one frame, given as video_id@HH:MM:SS.".into(),
            args: vec![ArgSpec::new("frame", ArgKind::FrameRef, true, Constraint::NonEmpty, "video_id@HH:MM:SS")],
        }
    }

    fn call(&self, args: &Map<String, Value>) -> Result<ToolOutput, ToolFailure> {
        let key = args["frame"].as_str().unwrap_or_default();
        let wanted =
            FrameRef::parse_key(key).ok_or_else(|| ToolFailure::bad_args(format!("bad frame reference {key:?}")))?;
        let source = self
            .library
            .get(&wanted.video_id)
            .ok_or_else(|| ToolFailure::bad_args(format!("video {:?} is not ingested", wanted.video_id)))?;
        let frame = source
            .nearest_frame(wanted.timestamp)
            .filter(|f| (f.timestamp - wanted.timestamp).abs() <= 0.5)
            .ok_or_else(|| ToolFailure::bad_args(format!("no stored frame at {key}")))?;
        let detector = self.detector.as_ref().ok_or_else(|| ToolFailure::environment("no detector is configured"))?;
        let fref =
            FrameRef { video_id: wanted.video_id.clone(), timestamp: frame.timestamp, image: frame.image_ref.clone() };
        let faces = detector.detect(&fref).map_err(|e| ToolFailure::upstream(e.to_string()))?;
        let records: Vec<Value> = faces
            .iter()
            .filter(|d| d.bbox.within_unit_square())
            .map(|d| json!({"box": d.bbox, "label": d.label, "confidence": d.confidence}))
            .collect();
        Ok(ToolOutput {
            content: Value::Array(records).to_string(),
            artifacts: vec![Artifact { name: "frame".into(), reference: fref.key() }],
        })
    }
}
