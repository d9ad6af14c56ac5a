//! Extractive answering over passages, used by the offline model.
//!
//! Multiple-choice questions pick every option whose content words all occur
//! in the passages (or the best-covered option when none is complete).
//! Localization questions return the first time reference on the passage
//! line that best overlaps the question, falling back to that passage's
//! span. Anything else returns the best line itself.

use std::collections::BTreeSet;
use std::sync::LazyLock;

use regex::Regex;

use super::context::Doc;
use crate::text::content_tokens;
use crate::timecode::{first_time_ref, TimeRef};

static OPTION_MARK: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?:^|[\s:?.])([a-h])[.)]\s").expect("option regex"));

static LABEL_LIST: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"(?i)^\s*[a-h](?:(?:\s*(?:,|&|/|\band\b)\s*|\s+)[a-h])*\s*\.?\s*$").expect("label list regex")
});

/// Labels of a reply that consists of nothing but option labels, such as
/// `"b, d"`.
pub fn label_list(text: &str) -> Option<Vec<char>> {
    if !LABEL_LIST.is_match(text) {
        return None;
    }
    let mut labels: Vec<char> = text
        .split(|c: char| !c.is_alphanumeric())
        .filter(|w| w.len() == 1)
        .filter_map(|w| w.chars().next())
        .map(|c| c.to_ascii_lowercase())
        .collect();
    labels.dedup();
    Some(labels)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChoiceOption {
    pub label: char,
    pub text: String,
}

/// Splits a question into its stem and `a. … b. …` options. Labels must run
/// consecutively from `a`; fewer than two options means no options.
pub fn parse_options(question: &str) -> (String, Vec<ChoiceOption>) {
    let marks: Vec<(char, usize, usize)> = OPTION_MARK
        .captures_iter(question)
        .map(|c| {
            let g = c.get(1).expect("label group");
            let label = g.as_str().chars().next().expect("one char");
            let whole = c.get(0).expect("match");
            (label, g.start(), whole.end())
        })
        .collect();
    let Some(first) = marks.iter().position(|m| m.0 == 'a') else {
        return (question.trim().to_string(), Vec::new());
    };
    let mut chosen = vec![marks[first]];
    for m in &marks[first + 1..] {
        let expected = (chosen.last().expect("non-empty").0 as u8 + 1) as char;
        if m.0 == expected {
            chosen.push(*m);
        }
    }
    if chosen.len() < 2 {
        return (question.trim().to_string(), Vec::new());
    }
    let mut options = Vec::with_capacity(chosen.len());
    for (i, &(label, _, body_start)) in chosen.iter().enumerate() {
        let body_end = chosen.get(i + 1).map(|m| m.1).unwrap_or(question.len());
        options.push(ChoiceOption { label, text: question[body_start..body_end].trim().to_string() });
    }
    (question[..chosen[0].1].trim().to_string(), options)
}

pub fn is_localization_question(stem: &str) -> bool {
    let lower = stem.to_lowercase();
    let words: BTreeSet<&str> = lower.split(|c: char| !c.is_alphanumeric()).filter(|w| !w.is_empty()).collect();
    words.contains("when")
        || words.contains("timestamp")
        || ["what time", "which time", "time period", "at what point"].iter().any(|p| lower.contains(p))
}

fn coverage(option: &str, corpus: &BTreeSet<String>) -> f64 {
    let tokens = content_tokens(option);
    if tokens.is_empty() {
        return 0.0;
    }
    tokens.iter().filter(|t| corpus.contains(*t)).count() as f64 / tokens.len() as f64
}

pub fn choose_options(options: &[ChoiceOption], docs: &[Doc]) -> Vec<char> {
    let corpus: BTreeSet<String> = docs.iter().flat_map(|d| content_tokens(&d.text)).collect();
    let scores: Vec<f64> = options.iter().map(|o| coverage(&o.text, &corpus)).collect();
    let complete: Vec<char> = options.iter().zip(&scores).filter(|(_, &s)| s >= 1.0).map(|(o, _)| o.label).collect();
    if !complete.is_empty() {
        return complete;
    }
    let mut best = 0;
    for (i, s) in scores.iter().enumerate() {
        if *s > scores[best] {
            best = i;
        }
    }
    vec![options[best].label]
}

struct Line<'a> {
    doc: &'a Doc,
    text: &'a str,
    overlap: usize,
}

fn best_line<'a>(stem: &str, docs: &'a [Doc]) -> Option<Line<'a>> {
    let q = content_tokens(stem);
    let mut best: Option<Line<'a>> = None;
    for doc in docs {
        for text in doc.text.lines().map(str::trim).filter(|l| !l.is_empty()) {
            let overlap = content_tokens(text).intersection(&q).count();
            if best.as_ref().is_none_or(|b| overlap > b.overlap) {
                best = Some(Line { doc, text, overlap });
            }
        }
    }
    best
}

fn locate(line: &Line<'_>) -> Option<String> {
    if let Some(found) = first_time_ref(line.text) {
        return Some(found.to_string());
    }
    line.doc.span.map(|s| if s.lo == s.hi { TimeRef::Point(s.lo).to_string() } else { s.to_string() })
}

/// Answers `question` from `docs`.
pub fn read(question: &str, docs: &[Doc]) -> String {
    let (stem, options) = parse_options(question);
    if !options.is_empty() {
        let labels: Vec<String> = choose_options(&options, docs).into_iter().map(String::from).collect();
        return labels.join(", ");
    }
    let Some(line) = best_line(&stem, docs) else {
        return "unknown".to_string();
    };
    if is_localization_question(&stem) {
        return locate(&line).unwrap_or_else(|| "unknown".to_string());
    }
    line.text.to_string()
}
