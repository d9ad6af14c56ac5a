use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::providers::reader::label_list;
use crate::text::word_tokens;
use crate::timecode::{first_time_ref, parse_time_ref, Span, TimeRef};

pub const POINT_TOLERANCE: f64 = 2.0;
pub const IOU_THRESHOLD: f64 = 0.9;
/// Longest truth span a single predicted instant can be credited against.
pub const MAX_POINT_SPAN: f64 = 4.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rule {
    /// |pred - truth| <= 2 s.
    PointTolerance,
    /// A predicted span against a point truth: its midpoint within 2 s.
    SpanMidpoint,
    /// IoU > 0.9.
    SpanIou,
    /// A predicted point inside a truth span of at most 4 s.
    PointInShortSpan,
    /// Exact equality of label sets.
    ChoiceSet,
    /// Nothing could be read from the prediction.
    Unparseable,
}

/// Human-readable description of every rule, included in reports.
pub const LEGEND: &[(&str, &str)] = &[
    ("point_tolerance", "predicted instant within 2 s (inclusive) of the true instant"),
    ("span_midpoint", "predicted span scored by its midpoint against the true instant, 2 s inclusive"),
    ("span_iou", "IoU of predicted and true span strictly above 0.9"),
    ("point_in_short_span", "predicted instant inside a true span no longer than 4 s"),
    ("choice_set", "first run of option labels in the prediction equals the true label set"),
    ("unparseable", "no time reference or label could be read from the prediction; scored incorrect"),
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Score {
    pub correct: bool,
    pub rule: Rule,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl Score {
    fn unparseable(note: impl Into<String>) -> Self {
        Score { correct: false, rule: Rule::Unparseable, note: Some(note.into()) }
    }
}

/// Intersection over union. Two degenerate spans give 1 when they coincide
/// and 0 otherwise.
pub fn iou(a: Span, b: Span) -> Result<f64> {
    for s in [a, b] {
        if !(s.lo.is_finite() && s.hi.is_finite()) || s.lo > s.hi {
            return Err(Error::invalid(format!("invalid span [{}, {}]", s.lo, s.hi)));
        }
    }
    let union = a.hi.max(b.hi) - a.lo.min(b.lo);
    if union == 0.0 {
        return Ok(if a.lo == b.lo { 1.0 } else { 0.0 });
    }
    let inter = (a.hi.min(b.hi) - a.lo.max(b.lo)).max(0.0);
    Ok((inter / union).clamp(0.0, 1.0))
}

fn score_one(pred: TimeRef, truth: TimeRef) -> Score {
    let hit = |correct: bool, rule: Rule| Score { correct, rule, note: None };
    match (pred, truth) {
        (TimeRef::Point(p), TimeRef::Point(t)) => hit((p - t).abs() <= POINT_TOLERANCE, Rule::PointTolerance),
        (TimeRef::Span(p), TimeRef::Point(t)) => hit((p.midpoint() - t).abs() <= POINT_TOLERANCE, Rule::SpanMidpoint),
        (TimeRef::Span(p), TimeRef::Span(t)) => match iou(p, t) {
            Ok(v) => hit(v > IOU_THRESHOLD, Rule::SpanIou),
            Err(e) => Score::unparseable(e.to_string()),
        },
        (TimeRef::Point(p), TimeRef::Span(t)) => {
            hit(t.len() <= MAX_POINT_SPAN && t.lo <= p && p <= t.hi, Rule::PointInShortSpan)
        }
    }
}

/// The prediction's time reference: the whole text if it parses, otherwise
/// the first timestamp or span inside it.
pub fn read_prediction(predicted: &str) -> Option<TimeRef> {
    parse_time_ref(predicted.trim()).ok().or_else(|| first_time_ref(predicted))
}

/// Scores a free-text prediction against one or more acceptable truths; any
/// match counts.
pub fn score_localization(predicted: &str, truths: &[TimeRef]) -> Score {
    if truths.is_empty() {
        return Score::unparseable("no ground truth given");
    }
    let Some(pred) = read_prediction(predicted) else {
        return Score::unparseable(format!("no time reference in {predicted:?}"));
    };
    let scores: Vec<Score> = truths.iter().map(|&t| score_one(pred, t)).collect();
    let mut best = scores.iter().find(|s| s.correct).unwrap_or(&scores[0]).clone();
    if truths.len() > 1 {
        best.note = Some(format!("{} acceptable answers, any may match", truths.len()));
    }
    best
}

/// Labels chosen by a prediction: all of it when it is nothing but labels,
/// otherwise the first run of standalone label tokens ("The answer is b and
/// d." gives b, d).
pub fn chosen_labels(predicted: &str, valid: &[char]) -> Vec<char> {
    let is_label = |w: &str| {
        let mut cs = w.chars();
        matches!((cs.next(), cs.next()), (Some(c), None) if valid.contains(&c))
    };
    if let Some(labels) = label_list(predicted) {
        if labels.iter().all(|c| valid.contains(c)) {
            return labels;
        }
    }
    let tokens = word_tokens(predicted);
    let Some(start) = tokens.iter().position(|w| is_label(w)) else {
        return Vec::new();
    };
    let mut out = Vec::new();
    for w in &tokens[start..] {
        if is_label(w) {
            out.push(w.chars().next().expect("one char"));
        } else if w != "and" {
            break;
        }
    }
    out
}

pub fn score_choice(predicted: &str, truth: &[char], valid: &[char]) -> Score {
    let mut chosen = chosen_labels(predicted, valid);
    if chosen.is_empty() {
        return Score::unparseable(format!("no option label in {predicted:?}"));
    }
    chosen.sort_unstable();
    chosen.dedup();
    let mut truth: Vec<char> = truth.iter().map(|c| c.to_ascii_lowercase()).collect();
    truth.sort_unstable();
    truth.dedup();
    Score { correct: chosen == truth, rule: Rule::ChoiceSet, note: None }
}
