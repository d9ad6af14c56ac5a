//! Ingest manifest: the structured file an out-of-process frame extractor
//! (or the fixture generator) produces for one video.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::features::histogram_feature;
use super::{BoundingBox, Frame, Utterance, VideoSource, VideoType, VisualContent};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameRecord {
    pub timestamp: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub feature: Option<Vec<f32>>,
    /// Image path, relative to the manifest's directory unless absolute.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image: Option<String>,
}

/// Ground-truth face presence, served by the fixture detector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FaceTrack {
    pub t0: f64,
    pub t1: f64,
    pub label: String,
    #[serde(rename = "box")]
    pub bbox: BoundingBox,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneScript {
    pub t0: f64,
    pub t1: f64,
    pub location: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub time_of_day: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub details: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventScript {
    pub t0: f64,
    pub t1: f64,
    pub text: String,
}

/// Scripted visual content for synthetic videos. A frame at time `t` shows
/// the scene and every event whose half-open interval `[t0, t1)` holds `t`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SyntheticScript {
    #[serde(default)]
    pub scenes: Vec<SceneScript>,
    #[serde(default)]
    pub events: Vec<EventScript>,
}

impl SyntheticScript {
    pub fn visual_at(&self, t: f64, duration: f64) -> VisualContent {
        let inside = |t0: f64, t1: f64| (t0 <= t && t < t1) || (t == duration && t1 >= duration && t0 <= t);
        let scene = self.scenes.iter().find(|s| inside(s.t0, s.t1));
        VisualContent {
            location: scene.map(|s| s.location.clone()),
            time_of_day: scene.and_then(|s| s.time_of_day.clone()),
            events: self.events.iter().filter(|e| inside(e.t0, e.t1)).map(|e| e.text.clone()).collect(),
            details: scene.map(|s| s.details.clone()).unwrap_or_default(),
        }
    }

    /// Events overlapping `[lo, hi)`, in script order.
    pub fn events_in(&self, lo: f64, hi: f64) -> Vec<&EventScript> {
        self.events.iter().filter(|e| e.t0 < hi && e.t1 > lo).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VideoManifest {
    pub video_id: String,
    #[serde(default)]
    pub title: Option<String>,
    #[serde(default)]
    pub video_type: Option<VideoType>,
    pub duration: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub audio: Option<String>,
    pub frames: Vec<FrameRecord>,
    #[serde(default)]
    pub transcript: Vec<Utterance>,
    #[serde(default)]
    pub faces: Vec<FaceTrack>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub script: Option<SyntheticScript>,
}

impl VideoManifest {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| Error::invalid(format!("manifest {}: {e}", path.display())))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }

    /// Resolves frames into a validated [`VideoSource`]. Relative image
    /// paths are resolved against `base_dir`.
    pub fn into_source(self, base_dir: &Path) -> Result<VideoSource> {
        let mut frames = Vec::with_capacity(self.frames.len());
        for record in &self.frames {
            let image_ref = record.image.as_ref().map(|p| resolve(base_dir, p));
            let feature = match (&record.feature, &image_ref) {
                (Some(f), _) => f.clone(),
                (None, Some(path)) => histogram_feature(Path::new(path))?,
                (None, None) => {
                    return Err(Error::invalid(format!("frame at {} has neither feature nor image", record.timestamp)))
                }
            };
            let visual = self.script.as_ref().map(|s| s.visual_at(record.timestamp, self.duration));
            frames.push(Frame {
                timestamp: record.timestamp,
                feature,
                image_ref,
                annotated_ref: None,
                annotations: Vec::new(),
                visual,
            });
        }
        let source = VideoSource {
            title: self.title.clone().unwrap_or_else(|| self.video_id.clone()),
            video_id: self.video_id,
            video_type: self.video_type,
            duration: self.duration,
            frames,
            audio_ref: self.audio.map(|a| resolve(base_dir, &a)),
            transcript: self.transcript,
            faces: self.faces,
        };
        source.validate()?;
        Ok(source)
    }

    pub fn load_source(path: &Path) -> Result<VideoSource> {
        let base = path.parent().map(Path::to_path_buf).unwrap_or_else(|| PathBuf::from("."));
        Self::load(path)?.into_source(&base)
    }
}

fn resolve(base: &Path, p: &str) -> String {
    let path = Path::new(p);
    if path.is_absolute() {
        p.to_string()
    } else {
        base.join(path).to_string_lossy().into_owned()
    }
}
