//! Deterministic stand-in for a multimodal model.
//!
//! It reads the structured prompt context instead of pixels: synthetic
//! frames carry their scripted visual content, so captions and rewinder
//! answers are pure functions of the frames the pipeline actually shows it.
//! Whatever was not sampled is invisible to it, exactly as for a real model.

use std::collections::BTreeSet;

use serde_json::json;

use super::context::{AgentContext, AnswerContext, Doc, FrameView, FramesContext, PromptContext};
use super::reader::{label_list, parse_options, read};
use super::{ChatProvider, ChatRequest, ProviderError};
use crate::text::{content_tokens, word_tokens};
use crate::timecode::format_hms;
use crate::video::UNKNOWN;

/// Words that describe how to look rather than what to look for.
const SEARCH_NOISE: &[&str] = &[
    "analyze",
    "check",
    "examine",
    "exact",
    "extract",
    "find",
    "fps",
    "frame",
    "frames",
    "identify",
    "locate",
    "look",
    "moment",
    "most",
    "relevant",
    "report",
    "rewind",
    "segment",
    "segments",
    "timestamp",
    "1",
];

#[derive(Debug, Clone)]
pub struct SimulatedModel {
    name: String,
}

impl SimulatedModel {
    pub fn new(name: impl Into<String>) -> Self {
        SimulatedModel { name: name.into() }
    }
}

impl Default for SimulatedModel {
    fn default() -> Self {
        SimulatedModel::new("simulated")
    }
}

impl ChatProvider for SimulatedModel {
    fn name(&self) -> &str {
        &self.name
    }

    fn complete(&self, req: &ChatRequest) -> Result<String, ProviderError> {
        let ctx = req
            .context
            .as_ref()
            .and_then(PromptContext::from_value)
            .ok_or_else(|| ProviderError::Fixture(format!("{} needs a structured prompt context", self.name)))?;
        Ok(match ctx {
            PromptContext::Caption(fc) => caption(&fc).to_string(),
            PromptContext::Rewind(fc) => rewind(&fc),
            PromptContext::Verdict(ac) => {
                json!({"type": "direct_answer", "answer": read(&ac.task, &agent_docs(&ac))}).to_string()
            }
            PromptContext::Plan(_) => json!({
                "success": false,
                "reason": "no decomposition is available offline"
            })
            .to_string(),
            PromptContext::Answer(a) => read(&a.question, &a.docs),
            PromptContext::Synthesis(a) => synthesize(&a),
            PromptContext::TimeWindow { .. } => json!({"none": true}).to_string(),
        })
    }
}

fn agent_docs(ac: &AgentContext) -> Vec<Doc> {
    let results = ac.prior.iter().filter(|p| !p.content.is_empty()).map(|p| Doc {
        label: p.task.clone(),
        text: p.content.clone(),
        span: None,
    });
    let hits = ac.hits.iter().map(|h| Doc {
        label: h.entry_id.clone(),
        text: h.caption.clone(),
        span: Some(crate::timecode::Span { lo: h.start, hi: h.end }),
    });
    results.chain(hits).collect()
}

fn synthesize(a: &AnswerContext) -> String {
    let (_, options) = parse_options(&a.question);
    let sole_choice = match (&a.docs[..], a.failures.is_empty(), options.is_empty()) {
        ([doc], true, false) => label_list(&doc.text).map(|_| doc.text.trim().to_string()),
        _ => None,
    };
    let mut out = sole_choice.unwrap_or_else(|| read(&a.question, &a.docs));
    for f in &a.failures {
        out.push_str(&format!("\nCaveat: the subtask \"{}\" could not be completed ({}).", f.task, f.reason));
    }
    out
}

fn distinct<I: IntoIterator<Item = String>>(items: I) -> Vec<String> {
    let mut seen = BTreeSet::new();
    items.into_iter().filter(|s| !s.trim().is_empty() && seen.insert(s.clone())).collect()
}

fn or_unknown(items: Vec<String>, sep: &str) -> String {
    if items.is_empty() {
        UNKNOWN.to_string()
    } else {
        items.join(sep)
    }
}

fn labels(frame: &FrameView) -> Vec<String> {
    distinct(frame.annotations.iter().map(|a| a.label.clone()))
}

fn caption(fc: &FramesContext) -> serde_json::Value {
    let visuals: Vec<_> = fc.frames.iter().filter_map(|f| f.visual.as_ref()).collect();
    let time = distinct(visuals.iter().filter_map(|v| v.time_of_day.clone()));
    let location = distinct(visuals.iter().filter_map(|v| v.location.clone()));
    let mut people = distinct(fc.frames.iter().flat_map(labels));
    for speaker in distinct(fc.transcript.iter().map(|u| u.speaker.clone())) {
        if speaker != UNKNOWN && !people.contains(&speaker) {
            people.push(speaker);
        }
    }
    let events = distinct(visuals.iter().flat_map(|v| v.events.clone()));
    let mut details = distinct(visuals.iter().flat_map(|v| v.details.clone()));
    details.extend(fc.transcript.iter().map(|u| format!("{} says \"{}\"", u.speaker, u.text)));
    let summary = match (location.first(), events.is_empty()) {
        (Some(loc), false) => format!("In the {loc}: {}.", events.join("; ")),
        (Some(loc), true) => format!("A scene in the {loc}."),
        (None, false) => format!("{}.", events.join("; ")),
        (None, true) => UNKNOWN.to_string(),
    };
    json!({
        "time": or_unknown(time, "; "),
        "location": or_unknown(location, "; "),
        "characters": or_unknown(people, ", "),
        "events": events,
        "details": or_unknown(details, "; "),
        "summary": summary,
    })
}

fn rewind(fc: &FramesContext) -> String {
    let instruction = fc.instruction.clone().unwrap_or_default();
    let lower = instruction.to_lowercase();
    let words: BTreeSet<String> = word_tokens(&lower).into_iter().collect();
    let (lo, hi) = (format_hms(fc.start), format_hms(fc.end));
    if lower.contains("scene change") || lower.contains("scenes change") {
        return scene_changes(fc, &lo, &hi);
    }
    let asks_who = words.contains("who")
        || ["individual", "person", "people", "character", "actor"].iter().any(|w| words.contains(*w));
    if asks_who {
        return who_appears(fc, &lo, &hi);
    }
    find_event(fc, &instruction, &lo, &hi)
}

fn scene_changes(fc: &FramesContext, lo: &str, hi: &str) -> String {
    let loc = |f: &FrameView| f.visual.as_ref().and_then(|v| v.location.clone());
    let mut lines = Vec::new();
    let mut first_change = None;
    for (i, pair) in fc.frames.windows(2).enumerate() {
        let (a, b) = (loc(&pair[0]), loc(&pair[1]));
        if a != b {
            first_change.get_or_insert(i + 1);
            lines.push(format!(
                "Scene change at {}: {} -> {}.",
                pair[1].time,
                a.unwrap_or_else(|| UNKNOWN.into()),
                b.unwrap_or_else(|| UNKNOWN.into())
            ));
        }
    }
    match first_change {
        None => {
            let place = fc.frames.first().and_then(loc).unwrap_or_else(|| UNKNOWN.into());
            format!("No scene change between {lo} and {hi}; the scene stays in the {place}.")
        }
        Some(split) => {
            let before: BTreeSet<String> = fc.frames[..split].iter().flat_map(labels).collect();
            let after: BTreeSet<String> = fc.frames[split..].iter().flat_map(labels).collect();
            let shared: Vec<String> = before.intersection(&after).cloned().collect();
            if !shared.is_empty() {
                lines.push(format!("Both scenes feature {}.", shared.join(" and ")));
            }
            lines.join("\n")
        }
    }
}

fn who_appears(fc: &FramesContext, lo: &str, hi: &str) -> String {
    let mut lines = Vec::new();
    let mut seen = BTreeSet::new();
    for f in &fc.frames {
        for label in labels(f) {
            if seen.insert(label.clone()) {
                lines.push(format!("At {}: {} is visible.", f.time, label));
            }
        }
    }
    if lines.is_empty() {
        format!("No identifiable person between {lo} and {hi}.")
    } else {
        lines.join("\n")
    }
}

fn find_event(fc: &FramesContext, instruction: &str, lo: &str, hi: &str) -> String {
    let wanted: BTreeSet<String> =
        content_tokens(instruction).into_iter().filter(|t| !SEARCH_NOISE.contains(&t.as_str())).collect();
    // best (score, frame index, event) with earliest frame on ties
    let mut best: Option<(usize, usize, String)> = None;
    for (i, f) in fc.frames.iter().enumerate() {
        let Some(v) = &f.visual else { continue };
        for event in &v.events {
            let score = content_tokens(event).intersection(&wanted).count();
            if score > 0 && best.as_ref().is_none_or(|b| score > b.0) {
                best = Some((score, i, event.clone()));
            }
        }
    }
    let Some((_, start, event)) = best else {
        return format!("Nothing matching the request was found between {lo} and {hi}.");
    };
    let shows = |f: &FrameView| f.visual.as_ref().is_some_and(|v| v.events.contains(&event));
    let mut end = start;
    while end + 1 < fc.frames.len() && shows(&fc.frames[end + 1]) {
        end += 1;
    }
    if end == start {
        format!("{}: {}", fc.frames[start].time, event)
    } else {
        format!("[{}, {}]: {}", fc.frames[start].time, fc.frames[end].time, event)
    }
}
