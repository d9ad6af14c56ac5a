//! Prompt templates. The texts live in `prompts/*.txt`; placeholders are
//! `{name}` and are filled by plain substitution. Live models read the text,
//! offline models read the structured context sent alongside it.

use crate::providers::context::{Doc, FailureNote, FrameView, HitView, PriorResult};
use crate::timecode::format_hms;
use crate::toolbox::ToolSpec;
use crate::video::Utterance;

pub const VERSION: &str = "1";

pub const CAPTION: &str = include_str!("../prompts/caption.txt");
pub const REWIND: &str = include_str!("../prompts/rewind.txt");
pub const CONQUEROR: &str = include_str!("../prompts/conqueror.txt");
pub const DIVIDER: &str = include_str!("../prompts/divider.txt");
pub const SYNTHESIS: &str = include_str!("../prompts/synthesis.txt");
pub const ANSWER: &str = include_str!("../prompts/answer.txt");
pub const TIME_WINDOW: &str = include_str!("../prompts/time_window.txt");

/// Replaces each `{key}` with its value. Unknown placeholders stay as they
/// are, so JSON braces in the templates survive.
pub fn fill(template: &str, values: &[(&str, String)]) -> String {
    let mut out = template.to_string();
    for (k, v) in values {
        out = out.replace(&format!("{{{k}}}"), v);
    }
    out
}

fn or_none(lines: Vec<String>) -> String {
    if lines.is_empty() {
        "(none)".to_string()
    } else {
        lines.join("\n")
    }
}

pub fn frames_block(frames: &[FrameView]) -> String {
    or_none(
        frames
            .iter()
            .map(|f| {
                let labels: Vec<&str> = f.annotations.iter().map(|a| a.label.as_str()).collect();
                let mut line = format!("[{}]", f.time);
                if let Some(img) = &f.image {
                    line.push_str(&format!(" {img}"));
                }
                if !labels.is_empty() {
                    line.push_str(&format!(" labeled: {}", labels.join(", ")));
                }
                line
            })
            .collect(),
    )
}

pub fn transcript_block(utterances: &[Utterance]) -> String {
    or_none(
        utterances
            .iter()
            .map(|u| format!("[{} - {}] {}: {}", format_hms(u.t0), format_hms(u.t1), u.speaker, u.text))
            .collect(),
    )
}

pub fn hits_block(hits: &[HitView]) -> String {
    or_none(hits.iter().map(|h| format!("[{}, {}] ({})\n{}", h.start_hms, h.end_hms, h.video_id, h.caption)).collect())
}

pub fn prior_block(prior: &[PriorResult]) -> String {
    or_none(prior.iter().map(|p| format!("- {} [{}]: {}", p.task, p.status, p.content)).collect())
}

pub fn tools_block(tools: &[ToolSpec]) -> String {
    if tools.is_empty() {
        return "(none)".to_string();
    }
    serde_json::to_string_pretty(tools).expect("specs serialize")
}

pub fn docs_block(docs: &[Doc]) -> String {
    or_none(
        docs.iter()
            .map(|d| match d.span {
                Some(s) => format!("{} {}:\n{}", d.label, s, d.text),
                None => format!("{}:\n{}", d.label, d.text),
            })
            .collect(),
    )
}

pub fn failures_block(failures: &[FailureNote]) -> String {
    or_none(failures.iter().map(|f| format!("- {}: {}", f.task, f.reason)).collect())
}
