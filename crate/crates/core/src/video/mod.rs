//! Ingestion: scene detection, frame sampling, visual prompting, audio
//! transcripts and scene captioning, ending in knowledge-store entries.

mod annotate;
mod caption;
mod detect;
mod features;
mod ingest;
mod library;
mod manifest;
mod render;
mod sample;
mod transcript;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use annotate::{annotate_frames, AnnotationWarning};
pub use caption::{caption_segment, parse_caption, CaptionOutcome};
pub use detect::{detect_scenes, frame_distance, normalize_unit_sum};
pub use features::histogram_feature;
pub use ingest::{ingest, IngestProviders, IngestReport, SegmentReport, SegmentStatus};
pub use library::VideoLibrary;
pub use manifest::{EventScript, FaceTrack, FrameRecord, SceneScript, SyntheticScript, VideoManifest};
pub use render::{AnnotationRenderer, BoxRenderer};
pub use sample::{sample_frames, SampleOutcome};
pub use transcript::{assign_speakers, build_transcript, utterances_overlapping, TranscriptOutcome};

/// The four video genres used for per-type reporting.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VideoType {
    Vlog,
    EpisodeMovie,
    Variety,
    Documentary,
}

impl VideoType {
    pub const ALL: [VideoType; 4] =
        [VideoType::Vlog, VideoType::EpisodeMovie, VideoType::Variety, VideoType::Documentary];

    pub fn name(self) -> &'static str {
        match self {
            VideoType::Vlog => "vlog",
            VideoType::EpisodeMovie => "episode_movie",
            VideoType::Variety => "variety",
            VideoType::Documentary => "documentary",
        }
    }
}

/// Box in normalized image coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

impl BoundingBox {
    pub fn within_unit_square(&self) -> bool {
        let finite = [self.x, self.y, self.w, self.h].iter().all(|v| v.is_finite());
        finite
            && self.x >= 0.0
            && self.y >= 0.0
            && self.w >= 0.0
            && self.h >= 0.0
            && self.x + self.w <= 1.0 + 1e-9
            && self.y + self.h <= 1.0 + 1e-9
    }
}

/// Raw detector output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    #[serde(rename = "box")]
    pub bbox: BoundingBox,
    pub label: String,
    pub confidence: f64,
}

/// A validated detection attached to a frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Annotation {
    #[serde(rename = "box")]
    pub bbox: BoundingBox,
    pub label: String,
    pub source: String,
}

impl Annotation {
    pub fn new(bbox: BoundingBox, label: impl Into<String>, source: impl Into<String>) -> Result<Self> {
        let label = label.into();
        if label.trim().is_empty() {
            return Err(Error::invalid("annotation label must be non-empty"));
        }
        if !bbox.within_unit_square() {
            return Err(Error::invalid(format!("box {bbox:?} leaves the unit square")));
        }
        Ok(Annotation { bbox, label, source: source.into() })
    }
}

/// What a synthetic frame shows. Stands in for pixel content when a video
/// comes from a scripted manifest rather than decoded images.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct VisualContent {
    #[serde(default)]
    pub location: Option<String>,
    #[serde(default)]
    pub time_of_day: Option<String>,
    #[serde(default)]
    pub events: Vec<String>,
    #[serde(default)]
    pub details: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Frame {
    pub timestamp: f64,
    pub feature: Vec<f32>,
    #[serde(default)]
    pub image_ref: Option<String>,
    /// Visual-prompted copy of `image_ref`, when one was rendered.
    #[serde(default)]
    pub annotated_ref: Option<String>,
    #[serde(default)]
    pub annotations: Vec<Annotation>,
    #[serde(default)]
    pub visual: Option<VisualContent>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Utterance {
    pub speaker: String,
    pub text: String,
    pub t0: f64,
    pub t1: f64,
}

impl Utterance {
    pub fn validate(&self) -> Result<()> {
        if !(self.t0.is_finite() && self.t1.is_finite()) || self.t0 > self.t1 {
            return Err(Error::invalid(format!("utterance times [{}, {}] are invalid", self.t0, self.t1)));
        }
        Ok(())
    }
}

/// A diarizer's speaker turn.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeakerTurn {
    pub speaker: String,
    pub t0: f64,
    pub t1: f64,
}

/// Six-field structured summary of one segment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneCaption {
    pub time_context: String,
    pub location: String,
    pub characters: String,
    pub events_chronological: Vec<String>,
    pub scene_details: String,
    pub summary: String,
}

pub const UNKNOWN: &str = "unknown";

impl SceneCaption {
    /// Labeled fields in fixed order; this exact text is what gets embedded.
    pub fn serialize_for_embedding(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("Time: {}\n", self.time_context));
        out.push_str(&format!("Location: {}\n", self.location));
        out.push_str(&format!("Characters: {}\n", self.characters));
        out.push_str("Events:\n");
        if self.events_chronological.is_empty() {
            out.push_str(&format!("- {UNKNOWN}\n"));
        }
        for event in &self.events_chronological {
            out.push_str(&format!("- {event}\n"));
        }
        out.push_str(&format!("Details: {}\n", self.scene_details));
        out.push_str(&format!("Summary: {}", self.summary));
        out
    }

    /// A caption that only carries raw model output.
    pub fn from_raw(raw: &str) -> Self {
        SceneCaption {
            time_context: UNKNOWN.into(),
            location: UNKNOWN.into(),
            characters: UNKNOWN.into(),
            events_chronological: Vec::new(),
            scene_details: UNKNOWN.into(),
            summary: raw.trim().to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub segment_id: String,
    pub start_ts: f64,
    pub end_ts: f64,
    pub sampled_frames: Vec<Frame>,
    pub transcript: Vec<Utterance>,
    pub caption: Option<SceneCaption>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DetectionParams {
    pub diff_threshold: f64,
    pub min_segment_seconds: f64,
    pub frames_per_segment: usize,
}

impl Default for DetectionParams {
    fn default() -> Self {
        DetectionParams { diff_threshold: 0.3, min_segment_seconds: 2.0, frames_per_segment: 10 }
    }
}

impl DetectionParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.diff_threshold > 0.0 && self.diff_threshold < 1.0) {
            return Err(Error::invalid("diff_threshold must lie in (0, 1)"));
        }
        if !(self.min_segment_seconds > 0.0 && self.min_segment_seconds.is_finite()) {
            return Err(Error::invalid("min_segment_seconds must be positive"));
        }
        if self.frames_per_segment == 0 {
            return Err(Error::invalid("frames_per_segment must be positive"));
        }
        Ok(())
    }
}

/// A decoded (or synthesized) video ready for ingestion and rewinding.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VideoSource {
    pub video_id: String,
    pub title: String,
    pub video_type: Option<VideoType>,
    pub duration: f64,
    pub frames: Vec<Frame>,
    pub audio_ref: Option<String>,
    /// Utterances shipped with the manifest; fixture ASR reads them.
    pub transcript: Vec<Utterance>,
    pub faces: Vec<FaceTrack>,
}

impl VideoSource {
    pub fn validate(&self) -> Result<()> {
        if self.video_id.trim().is_empty() {
            return Err(Error::invalid("video_id must be non-empty"));
        }
        if !(self.duration > 0.0 && self.duration.is_finite()) {
            return Err(Error::invalid("duration must be positive"));
        }
        let dim = self.frames.first().map(|f| f.feature.len());
        let mut prev = f64::NEG_INFINITY;
        for f in &self.frames {
            if !(f.timestamp > prev) {
                return Err(Error::invalid(format!("frame timestamps must increase strictly (at {})", f.timestamp)));
            }
            if f.timestamp < 0.0 || f.timestamp > self.duration {
                return Err(Error::invalid(format!("frame at {} lies outside [0, {}]", f.timestamp, self.duration)));
            }
            if Some(f.feature.len()) != dim {
                return Err(Error::invalid("feature length must be constant per video"));
            }
            prev = f.timestamp;
        }
        for u in &self.transcript {
            u.validate()?;
        }
        Ok(())
    }

    /// The stored frame nearest to `t`, preferring the earlier one on ties.
    pub fn nearest_frame(&self, t: f64) -> Option<&Frame> {
        let idx = self.frames.partition_point(|f| f.timestamp < t);
        let after = self.frames.get(idx);
        let before = idx.checked_sub(1).and_then(|i| self.frames.get(i));
        match (before, after) {
            (Some(b), Some(a)) => {
                if (t - b.timestamp) <= (a.timestamp - t) {
                    Some(b)
                } else {
                    Some(a)
                }
            }
            (b, a) => b.or(a),
        }
    }
}
