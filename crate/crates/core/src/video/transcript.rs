use super::{SpeakerTurn, Utterance, UNKNOWN};
use crate::providers::{AsrProvider, AudioRef, DiarizationProvider};
use crate::timecode::Span;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TranscriptOutcome {
    pub utterances: Vec<Utterance>,
    pub warnings: Vec<String>,
}

/// ASR followed by diarization. Provider failures yield an empty transcript
/// and a warning, since plenty of videos have no speech at all.
pub fn build_transcript(
    audio: &AudioRef,
    asr: &dyn AsrProvider,
    diarizer: Option<&dyn DiarizationProvider>,
) -> TranscriptOutcome {
    let mut warnings = Vec::new();
    let mut utterances = match asr.transcribe(audio) {
        Ok(u) => u,
        Err(e) => return TranscriptOutcome { utterances: Vec::new(), warnings: vec![format!("asr failed: {e}")] },
    };
    utterances.retain(|u| match u.validate() {
        Ok(()) => true,
        Err(e) => {
            warnings.push(format!("dropped utterance: {e}"));
            false
        }
    });
    if let Some(diarizer) = diarizer {
        match diarizer.diarize(audio) {
            Ok(turns) => assign_speakers(&mut utterances, &turns),
            Err(e) => warnings.push(format!("diarization failed: {e}")),
        }
    }
    for u in &mut utterances {
        if u.speaker.trim().is_empty() {
            u.speaker = UNKNOWN.to_string();
        }
    }
    utterances.sort_by(|a, b| a.t0.total_cmp(&b.t0).then_with(|| a.speaker.cmp(&b.speaker)));
    TranscriptOutcome { utterances, warnings }
}

/// Labels each utterance with the speaker whose turn overlaps it most
/// (earlier turn on ties). Utterances no turn touches keep their label.
pub fn assign_speakers(utterances: &mut [Utterance], turns: &[SpeakerTurn]) {
    for u in utterances {
        let mut best: Option<(&SpeakerTurn, f64)> = None;
        for turn in turns {
            let overlap = u.t1.min(turn.t1) - u.t0.max(turn.t0);
            let touches = overlap > 0.0 || (u.t0 == u.t1 && turn.t0 <= u.t0 && u.t0 < turn.t1);
            if !touches {
                continue;
            }
            if best.is_none_or(|(_, o)| overlap > o) {
                best = Some((turn, overlap));
            }
        }
        if let Some((turn, _)) = best {
            u.speaker = turn.speaker.clone();
        }
    }
}

/// Utterances whose `[t0, t1]` overlaps the half-open span `[lo, hi)`.
/// An utterance belongs to every segment it overlaps.
pub fn utterances_overlapping(utterances: &[Utterance], span: Span) -> Vec<Utterance> {
    utterances
        .iter()
        .filter(|u| {
            if u.t0 == u.t1 {
                span.lo <= u.t0 && u.t0 < span.hi
            } else {
                u.t1.min(span.hi) - u.t0.max(span.lo) > 0.0
            }
        })
        .cloned()
        .collect()
}
