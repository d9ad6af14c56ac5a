use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::thread;

use serde::{Deserialize, Serialize};

use super::caption::caption_segment;
use super::{
    annotate_frames, build_transcript, detect_scenes, sample_frames, utterances_overlapping, AnnotationRenderer,
    DetectionParams, Segment, Utterance, VideoSource,
};
use crate::error::Result;
use crate::providers::{AsrProvider, AudioRef, ChatProvider, DetectorProvider, DiarizationProvider, EmbeddingProvider};
use crate::store::{KnowledgeEntry, KnowledgeStore};
use crate::timecode::Span;

pub struct IngestProviders<'a> {
    pub mllm: &'a dyn ChatProvider,
    pub embedder: &'a dyn EmbeddingProvider,
    pub asr: Option<&'a dyn AsrProvider>,
    pub diarizer: Option<&'a dyn DiarizationProvider>,
    pub detector: Option<&'a dyn DetectorProvider>,
    pub renderer: Option<&'a dyn AnnotationRenderer>,
    /// Segments captioned at once.
    pub concurrency: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum SegmentStatus {
    Stored { entry_id: String },
    Failed { error: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentReport {
    pub start_ts: f64,
    pub end_ts: f64,
    #[serde(flatten)]
    pub status: SegmentStatus,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IngestReport {
    pub video_id: String,
    pub segments: Vec<SegmentReport>,
    /// Video-level warnings (transcript problems and the like).
    pub warnings: Vec<String>,
    #[serde(skip)]
    pub entries: Vec<KnowledgeEntry>,
}

impl IngestReport {
    pub fn stored(&self) -> usize {
        self.segments.iter().filter(|s| matches!(s.status, SegmentStatus::Stored { .. })).count()
    }

    pub fn failed(&self) -> usize {
        self.segments.len() - self.stored()
    }
}

fn process(
    source: &VideoSource,
    span: Span,
    transcript: &[Utterance],
    params: &DetectionParams,
    p: &IngestProviders,
    store: &KnowledgeStore,
) -> (SegmentReport, Option<KnowledgeEntry>) {
    let mut warnings = Vec::new();
    let mut run = || -> std::result::Result<KnowledgeEntry, String> {
        let sampled = sample_frames(span, &source.frames, params.frames_per_segment).map_err(|e| e.to_string())?;
        if sampled.short {
            warnings.push(format!(
                "only {} frames available, wanted {}",
                sampled.frames.len(),
                params.frames_per_segment
            ));
        }
        let (frames, notes) = annotate_frames(&source.video_id, sampled.frames, p.detector, p.renderer);
        warnings.extend(notes.into_iter().map(|w| format!("{}: {}", w.timestamp, w.message)));
        let mut segment = Segment {
            segment_id: KnowledgeEntry::segment_id(&source.video_id, span.lo, span.hi),
            start_ts: span.lo,
            end_ts: span.hi,
            sampled_frames: frames,
            transcript: utterances_overlapping(transcript, span),
            caption: None,
        };
        let outcome = caption_segment(&source.video_id, &segment, p.mllm).map_err(|e| format!("caption: {e}"))?;
        warnings.extend(outcome.warning);
        segment.caption = Some(outcome.caption);
        let caption_text = segment.caption.as_ref().expect("just set").serialize_for_embedding();
        let embedding = p.embedder.embed(&caption_text).map_err(|e| format!("embed: {e}"))?;
        let entry = KnowledgeEntry {
            entry_id: segment.segment_id,
            video_id: source.video_id.clone(),
            start_ts: span.lo,
            end_ts: span.hi,
            caption_text,
            embedding,
        };
        store.upsert(entry.clone()).map_err(|e| format!("store: {e}"))?;
        Ok(entry)
    };
    let result = run();
    let (status, entry) = match result {
        Ok(e) => (SegmentStatus::Stored { entry_id: e.entry_id.clone() }, Some(e)),
        Err(error) => (SegmentStatus::Failed { error }, None),
    };
    (SegmentReport { start_ts: span.lo, end_ts: span.hi, status, warnings }, entry)
}

/// Runs the whole pipeline for one video and upserts one entry per
/// segment. A failing segment is reported and skipped; only invalid input
/// or a failed scene detection aborts the run. Entry ids derive from the
/// segment span, so ingesting again replaces rather than duplicates.
pub fn ingest(
    source: &VideoSource,
    params: &DetectionParams,
    providers: &IngestProviders,
    store: &KnowledgeStore,
) -> Result<IngestReport> {
    source.validate()?;
    params.validate()?;
    let spans = detect_scenes(&source.frames, params)?;
    let mut warnings = Vec::new();
    let transcript = match providers.asr {
        Some(asr) => {
            let audio = AudioRef { video_id: source.video_id.clone(), path: source.audio_ref.clone() };
            let out = build_transcript(&audio, asr, providers.diarizer);
            warnings.extend(out.warnings);
            out.utterances
        }
        None => Vec::new(),
    };

    let slots: Vec<Mutex<Option<(SegmentReport, Option<KnowledgeEntry>)>>> =
        spans.iter().map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    let workers = providers.concurrency.clamp(1, spans.len().max(1));
    thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some(&span) = spans.get(i) else { break };
                let done = process(source, span, &transcript, params, providers, store);
                *slots[i].lock().expect("slot lock") = Some(done);
            });
        }
    });

    let mut report = IngestReport {
        video_id: source.video_id.clone(),
        segments: Vec::with_capacity(spans.len()),
        warnings,
        entries: Vec::new(),
    };
    for slot in slots {
        let (seg, entry) = slot.into_inner().expect("slot lock").expect("every segment processed");
        for w in &seg.warnings {
            tracing::warn!(video = %source.video_id, start = seg.start_ts, "{w}");
        }
        report.segments.push(seg);
        report.entries.extend(entry);
    }
    Ok(report)
}
