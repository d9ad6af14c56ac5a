//! Benchmark harness: datasets, scoring rules, control answerers and
//! per-category / per-video-type reports.

mod answerers;
mod dataset;
mod score;

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::thread;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::video::VideoType;

pub use answerers::{Answered, Answerer, FramesStt, Mode, OmAgent, Video2Rag, STT_FRAMES};
pub use dataset::{load_dataset, parse_dataset, save_dataset, Category, EvalQuestion, GroundTruth};
pub use score::{
    chosen_labels, iou, read_prediction, score_choice, score_localization, Rule, Score, IOU_THRESHOLD, LEGEND,
    MAX_POINT_SPAN, POINT_TOLERANCE,
};

/// Scores a prediction by the question's category rule.
pub fn score_question(q: &EvalQuestion, predicted: &str) -> Score {
    match &q.ground_truth {
        GroundTruth::Labels(truth) => score_choice(predicted, truth, &q.labels()),
        GroundTruth::Times(_) => match q.truth_times() {
            Ok(truths) => score_localization(predicted, &truths),
            Err(e) => Score { correct: false, rule: Rule::Unparseable, note: Some(format!("bad ground truth: {e}")) },
        },
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuestionRecord {
    pub qid: String,
    pub video_id: String,
    pub category: Category,
    #[serde(default)]
    pub video_type: Option<VideoType>,
    pub predicted: String,
    pub correct: bool,
    pub rule: Rule,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
    /// The system failed on this question; `predicted` is empty.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(default)]
    pub unanswered: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Accuracy {
    pub correct: usize,
    pub total: usize,
    /// `correct / total`, 0 for an empty group.
    pub accuracy: f64,
}

impl Accuracy {
    fn of<'r>(records: impl IntoIterator<Item = &'r QuestionRecord>) -> Self {
        let (mut correct, mut total) = (0, 0);
        for r in records {
            total += 1;
            correct += r.correct as usize;
        }
        let accuracy = if total == 0 { 0.0 } else { correct as f64 / total as f64 };
        Accuracy { correct, total, accuracy }
    }
}

const UNTYPED: &str = "untyped";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub mode: Mode,
    pub total: Accuracy,
    pub per_category: BTreeMap<Category, Accuracy>,
    pub per_video_type: BTreeMap<String, Accuracy>,
    pub records: Vec<QuestionRecord>,
    pub legend: BTreeMap<String, String>,
}

fn type_key(t: Option<VideoType>) -> String {
    t.map(|t| t.name().to_string()).unwrap_or_else(|| UNTYPED.to_string())
}

impl EvalReport {
    /// Aggregates records; groups only appear when they hold a question.
    pub fn assemble(mode: Mode, records: Vec<QuestionRecord>) -> Self {
        let mut per_category = BTreeMap::new();
        for c in Category::ALL {
            let acc = Accuracy::of(records.iter().filter(|r| r.category == c));
            if acc.total > 0 {
                per_category.insert(c, acc);
            }
        }
        let mut per_video_type = BTreeMap::new();
        for r in &records {
            per_video_type.entry(type_key(r.video_type)).or_insert(());
        }
        let per_video_type = per_video_type
            .into_keys()
            .map(|k| {
                let acc = Accuracy::of(records.iter().filter(|r| type_key(r.video_type) == k));
                (k, acc)
            })
            .collect();
        EvalReport {
            mode,
            total: Accuracy::of(&records),
            per_category,
            per_video_type,
            legend: LEGEND.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect(),
            records,
        }
    }

    /// Recomputes every aggregate from the records and checks that the
    /// groups partition them.
    pub fn self_check(&self) -> Result<()> {
        let fresh = EvalReport::assemble(self.mode, self.records.clone());
        if fresh.total != self.total
            || fresh.per_category != self.per_category
            || fresh.per_video_type != self.per_video_type
        {
            return Err(Error::Internal("report aggregates disagree with its records".into()));
        }
        let by_cat: usize = self.per_category.values().map(|a| a.total).sum();
        let by_type: usize = self.per_video_type.values().map(|a| a.total).sum();
        if by_cat != self.records.len() || by_type != self.records.len() {
            return Err(Error::Internal("report groups do not partition the records".into()));
        }
        let all = [self.total]
            .into_iter()
            .chain(self.per_category.values().copied())
            .chain(self.per_video_type.values().copied());
        for a in all {
            if !(0.0..=1.0).contains(&a.accuracy) || a.correct > a.total {
                return Err(Error::Internal(format!("accuracy out of range: {a:?}")));
            }
        }
        Ok(())
    }

    pub fn category(&self, c: Category) -> Option<Accuracy> {
        self.per_category.get(&c).copied()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports serialize")
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json() + "\n")?;
        Ok(())
    }
}

#[derive(Debug, Clone, Default)]
pub struct BenchmarkOptions {
    /// Questions answered at once; 0 or 1 runs them in order.
    pub concurrency: usize,
    /// Writes `<qid>.json` traces here when set.
    pub trace_dir: Option<PathBuf>,
}

fn file_stem(qid: &str) -> String {
    qid.chars().map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' }).collect()
}

fn evaluate(
    q: &EvalQuestion,
    system: &dyn Answerer,
    types: &BTreeMap<String, VideoType>,
    trace_dir: Option<&Path>,
) -> QuestionRecord {
    let mut record = QuestionRecord {
        qid: q.qid.clone(),
        video_id: q.video_id.clone(),
        category: q.category,
        video_type: types.get(&q.video_id).copied(),
        predicted: String::new(),
        correct: false,
        rule: Rule::Unparseable,
        note: None,
        error: None,
        unanswered: false,
    };
    let answered = q.validate().and_then(|_| system.answer(q));
    match answered {
        Ok(a) => {
            if let (Some(dir), Some(trace)) = (trace_dir, &a.trace) {
                if let Err(e) = trace.save(&dir.join(format!("{}.json", file_stem(&q.qid)))) {
                    record.note = Some(format!("trace not written: {e}"));
                }
            }
            let score = score_question(q, &a.text);
            record.predicted = a.text;
            record.correct = score.correct;
            record.rule = score.rule;
            record.note = score.note.or(record.note);
            record.unanswered = a.unanswered;
        }
        Err(e) => record.error = Some(e.to_string()),
    }
    record
}

/// Answers and scores every question. Failures are recorded per question
/// and never stop the run. Records keep dataset order whatever the
/// concurrency.
pub fn run_benchmark(
    questions: &[EvalQuestion],
    system: &dyn Answerer,
    video_types: &BTreeMap<String, VideoType>,
    opts: &BenchmarkOptions,
) -> Result<EvalReport> {
    if let Some(dir) = &opts.trace_dir {
        fs::create_dir_all(dir)?;
    }
    let trace_dir = opts.trace_dir.as_deref();
    let workers = opts.concurrency.clamp(1, questions.len().max(1));
    let records: Vec<QuestionRecord> = if workers == 1 {
        questions.iter().map(|q| evaluate(q, system, video_types, trace_dir)).collect()
    } else {
        let next = AtomicUsize::new(0);
        let slots: Mutex<Vec<Option<QuestionRecord>>> = Mutex::new(vec![None; questions.len()]);
        thread::scope(|s| {
            for _ in 0..workers {
                s.spawn(|| loop {
                    let i = next.fetch_add(1, Ordering::SeqCst);
                    let Some(q) = questions.get(i) else { break };
                    let r = evaluate(q, system, video_types, trace_dir);
                    slots.lock().unwrap_or_else(|e| e.into_inner())[i] = Some(r);
                });
            }
        });
        slots
            .into_inner()
            .unwrap_or_else(|e| e.into_inner())
            .into_iter()
            .map(|r| r.expect("every question evaluated"))
            .collect()
    };
    let report = EvalReport::assemble(system.mode(), records);
    report.self_check()?;
    Ok(report)
}
