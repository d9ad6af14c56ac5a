use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::timecode::{parse_time_ref, TimeRef};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Category {
    Reasoning,
    InformationSummary,
    EventLocalization,
    ExternalKnowledge,
}

impl Category {
    pub const ALL: [Category; 4] =
        [Category::Reasoning, Category::InformationSummary, Category::EventLocalization, Category::ExternalKnowledge];

    pub fn name(self) -> &'static str {
        match self {
            Category::Reasoning => "reasoning",
            Category::InformationSummary => "information_summary",
            Category::EventLocalization => "event_localization",
            Category::ExternalKnowledge => "external_knowledge",
        }
    }

    pub fn is_choice(self) -> bool {
        self != Category::EventLocalization
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GroundTruth {
    /// Correct option labels; multi-answer questions list several.
    Labels(Vec<char>),
    /// Acceptable instants (`HH:MM:SS`) or spans (`[a, b]`); any may match.
    Times(Vec<String>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalQuestion {
    pub qid: String,
    pub video_id: String,
    pub category: Category,
    pub question: String,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub options: BTreeMap<char, String>,
    pub ground_truth: GroundTruth,
}

impl EvalQuestion {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::invalid(format!("question {}: {msg}", self.qid)));
        if self.qid.trim().is_empty() || self.video_id.trim().is_empty() || self.question.trim().is_empty() {
            return bad("qid, video_id and question must be non-empty".into());
        }
        if let Some(l) = self.options.keys().find(|l| !l.is_ascii_lowercase()) {
            return bad(format!("option label {l:?} must be a lowercase letter"));
        }
        match (&self.ground_truth, self.category.is_choice()) {
            (GroundTruth::Labels(labels), true) => {
                if self.options.len() < 2 {
                    return bad("multiple-choice questions need at least two options".into());
                }
                if labels.is_empty() {
                    return bad("no correct label given".into());
                }
                if let Some(l) = labels.iter().find(|l| !self.options.contains_key(l)) {
                    return bad(format!("label {l:?} is not an option"));
                }
                Ok(())
            }
            (GroundTruth::Times(times), false) => {
                if times.is_empty() {
                    return bad("no ground-truth time given".into());
                }
                self.truth_times().map(|_| ())
            }
            (GroundTruth::Labels(_), false) => bad("event localization needs timestamps or spans".into()),
            (GroundTruth::Times(_), true) => bad("multiple-choice categories need option labels".into()),
        }
    }

    pub fn labels(&self) -> Vec<char> {
        self.options.keys().copied().collect()
    }

    pub fn truth_times(&self) -> Result<Vec<TimeRef>> {
        match &self.ground_truth {
            GroundTruth::Times(times) => times.iter().map(|t| parse_time_ref(t)).collect(),
            GroundTruth::Labels(_) => Ok(Vec::new()),
        }
    }

    /// The question as sent to a system, options inlined as `a. … b. …`.
    pub fn prompt(&self) -> String {
        if self.options.is_empty() {
            return self.question.clone();
        }
        let opts: Vec<String> = self.options.iter().map(|(l, t)| format!("{l}. {t}")).collect();
        format!("{} Choose from the following options: {}", self.question.trim(), opts.join(" "))
    }
}

/// Reads one JSON question per line. Blank lines are skipped; qids must be
/// unique.
pub fn parse_dataset(text: &str) -> Result<Vec<EvalQuestion>> {
    let mut out = Vec::new();
    let mut seen = BTreeSet::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let q: EvalQuestion =
            serde_json::from_str(line).map_err(|e| Error::invalid(format!("dataset line {}: {e}", i + 1)))?;
        q.validate()?;
        if !seen.insert(q.qid.clone()) {
            return Err(Error::invalid(format!("duplicate qid {}", q.qid)));
        }
        out.push(q);
    }
    Ok(out)
}

pub fn load_dataset(path: &Path) -> Result<Vec<EvalQuestion>> {
    parse_dataset(&fs::read_to_string(path)?)
}

pub fn save_dataset(path: &Path, questions: &[EvalQuestion]) -> Result<()> {
    let mut text = String::new();
    for q in questions {
        text.push_str(&serde_json::to_string(q)?);
        text.push('\n');
    }
    fs::write(path, text)?;
    Ok(())
}
