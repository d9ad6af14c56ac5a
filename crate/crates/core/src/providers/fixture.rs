//! Offline ASR, diarization, detection and search backed by fixture data.

use std::collections::BTreeMap;

use super::{
    AsrProvider, AudioRef, DetectorProvider, DiarizationProvider, FrameRef, ProviderError, SearchProvider,
    SearchSnippet,
};
use crate::video::{Detection, FaceTrack, SpeakerTurn, Utterance, VideoSource};

fn unknown(kind: &str, video_id: &str) -> ProviderError {
    ProviderError::Fixture(format!("no {kind} fixture for video {video_id:?}"))
}

/// Serves the utterances shipped with each manifest. Speaker labels are
/// kept as authored; a diarizer may overwrite them.
#[derive(Debug, Clone, Default)]
pub struct FixtureAsr {
    transcripts: BTreeMap<String, Vec<Utterance>>,
}

impl FixtureAsr {
    pub fn new(transcripts: BTreeMap<String, Vec<Utterance>>) -> Self {
        FixtureAsr { transcripts }
    }

    pub fn from_sources<'a>(sources: impl IntoIterator<Item = &'a VideoSource>) -> Self {
        FixtureAsr::new(sources.into_iter().map(|s| (s.video_id.clone(), s.transcript.clone())).collect())
    }
}

impl AsrProvider for FixtureAsr {
    fn name(&self) -> &str {
        "fixture-asr"
    }

    fn transcribe(&self, audio: &AudioRef) -> Result<Vec<Utterance>, ProviderError> {
        self.transcripts.get(&audio.video_id).cloned().ok_or_else(|| unknown("transcript", &audio.video_id))
    }
}

/// Derives speaker turns from the fixture transcript itself, one turn per
/// labeled utterance.
#[derive(Debug, Clone, Default)]
pub struct FixtureDiarizer {
    turns: BTreeMap<String, Vec<SpeakerTurn>>,
}

impl FixtureDiarizer {
    pub fn new(turns: BTreeMap<String, Vec<SpeakerTurn>>) -> Self {
        FixtureDiarizer { turns }
    }

    pub fn from_sources<'a>(sources: impl IntoIterator<Item = &'a VideoSource>) -> Self {
        FixtureDiarizer::new(
            sources
                .into_iter()
                .map(|s| {
                    let turns = s
                        .transcript
                        .iter()
                        .map(|u| SpeakerTurn { speaker: u.speaker.clone(), t0: u.t0, t1: u.t1 })
                        .collect();
                    (s.video_id.clone(), turns)
                })
                .collect(),
        )
    }
}

impl DiarizationProvider for FixtureDiarizer {
    fn name(&self) -> &str {
        "fixture-diarizer"
    }

    fn diarize(&self, audio: &AudioRef) -> Result<Vec<SpeakerTurn>, ProviderError> {
        self.turns.get(&audio.video_id).cloned().ok_or_else(|| unknown("diarization", &audio.video_id))
    }
}

/// Reports every ground-truth face track whose `[t0, t1)` holds the frame's
/// timestamp, with confidence 1. Boxes are passed through unchecked so the
/// caller's validation is exercised.
#[derive(Debug, Clone, Default)]
pub struct FixtureDetector {
    faces: BTreeMap<String, Vec<FaceTrack>>,
}

impl FixtureDetector {
    pub fn new(faces: BTreeMap<String, Vec<FaceTrack>>) -> Self {
        FixtureDetector { faces }
    }

    pub fn from_sources<'a>(sources: impl IntoIterator<Item = &'a VideoSource>) -> Self {
        FixtureDetector::new(sources.into_iter().map(|s| (s.video_id.clone(), s.faces.clone())).collect())
    }
}

impl DetectorProvider for FixtureDetector {
    fn name(&self) -> &str {
        "fixture-detector"
    }

    fn detect(&self, frame: &FrameRef) -> Result<Vec<Detection>, ProviderError> {
        let tracks = self.faces.get(&frame.video_id).ok_or_else(|| unknown("face", &frame.video_id))?;
        Ok(tracks
            .iter()
            .filter(|f| f.t0 <= frame.timestamp && frame.timestamp < f.t1)
            .map(|f| Detection { bbox: f.bbox, label: f.label.clone(), confidence: 1.0 })
            .collect())
    }
}

/// Query to snippets lookup. Queries match after trimming and case folding;
/// misses return no results.
#[derive(Debug, Clone, Default)]
pub struct FixtureSearch {
    answers: BTreeMap<String, Vec<SearchSnippet>>,
}

fn fold(query: &str) -> String {
    query.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase()
}

impl FixtureSearch {
    pub fn new(answers: BTreeMap<String, Vec<SearchSnippet>>) -> Self {
        FixtureSearch { answers: answers.into_iter().map(|(k, v)| (fold(&k), v)).collect() }
    }
}

impl SearchProvider for FixtureSearch {
    fn name(&self) -> &str {
        "fixture-search"
    }

    fn search(&self, query: &str) -> Result<Vec<SearchSnippet>, ProviderError> {
        if query.trim().is_empty() {
            return Err(ProviderError::InvalidInput("empty search query".into()));
        }
        Ok(self.answers.get(&fold(query)).cloned().unwrap_or_default())
    }
}
