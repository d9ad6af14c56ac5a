//! Answering one question: time extraction, filtered retrieval, the
//! divide-and-conquer loop and the final synthesis.

use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::engine::{conclusive_synthesis, Engine, EngineConfig, Rescuer};
use crate::error::{Error, Result};
use crate::prompts;
use crate::providers::context::PromptContext;
use crate::providers::{strip_code_fence, ChatProvider, ChatRequest, EmbeddingProvider, Message, ResponseContract};
use crate::store::{KnowledgeStore, RetrievalHit, TimeFilter, DEFAULT_K};
use crate::task_tree::TaskStatus;
use crate::timecode::{format_hms, parse_time_ref, parse_timestamp, Span, TimeRef};
use crate::toolbox::{ToolRegistry, ToolSpec};
use crate::trace::{RetrievedRef, TraceDocument, TraceEvent};

pub const DEFAULT_PAD: f64 = 5.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Query {
    pub text: String,
    #[serde(default)]
    pub video_id: Option<String>,
    #[serde(default)]
    pub extracted_filter: Option<TimeFilter>,
}

impl Query {
    pub fn new(text: impl Into<String>, video_id: Option<String>) -> Result<Self> {
        let text = text.into();
        if text.trim().is_empty() {
            return Err(Error::invalid("query text must be non-empty"));
        }
        Ok(Query { text, video_id, extracted_filter: None })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RetrievalContext {
    pub query: Query,
    pub hits: Vec<RetrievalHit>,
    pub tool_catalog: Vec<ToolSpec>,
}

static SPOKEN: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(
        r"(?i)\b(?:(\d+)\s*hours?(?:\s*,)?(?:\s+and)?\s*)?(?:(\d+)\s*minutes?)(?:(?:\s*,)?(?:\s+and)?\s*(\d+(?:\.\d+)?)\s*seconds?)?\b|\b(\d+)\s*hours?\b",
    )
    .expect("spoken time regex")
});

static CLOCK: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"\[[^\]]*\]|\b\d{1,3}:\d{1,2}(?::\d{1,2})?(?:\.\d{1,3})?\b").expect("clock regex"));

/// Instants and spans in `text`, in order: clock notation, `[a, b]` spans
/// and spoken forms such as "5 minutes and 41 seconds".
fn time_mentions(text: &str) -> Vec<(usize, TimeRef)> {
    let mut out: Vec<(usize, TimeRef)> =
        CLOCK.find_iter(text).filter_map(|m| parse_time_ref(m.as_str()).ok().map(|r| (m.start(), r))).collect();
    for caps in SPOKEN.captures_iter(text) {
        let num = |i: usize| caps.get(i).and_then(|m| m.as_str().parse::<f64>().ok()).unwrap_or(0.0);
        let secs = if caps.get(4).is_some() { num(4) * 3600.0 } else { num(1) * 3600.0 + num(2) * 60.0 + num(3) };
        out.push((caps.get(0).expect("match").start(), TimeRef::Point(secs)));
    }
    out.sort_by_key(|(pos, _)| *pos);
    out
}

/// The deterministic pass of [`extract_time_filter`].
pub fn pattern_window(text: &str, pad: f64) -> Option<Span> {
    let mentions = time_mentions(text);
    if mentions.is_empty() {
        return None;
    }
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for (_, r) in &mentions {
        let (a, b) = match r {
            TimeRef::Point(t) => (*t, *t),
            TimeRef::Span(s) => (s.lo, s.hi),
        };
        lo = lo.min(a);
        hi = hi.max(b);
    }
    Some(Span { lo: (lo - pad).max(0.0), hi: hi + pad })
}

fn llm_window(text: &str, llm: &dyn ChatProvider, pad: f64) -> Option<Span> {
    let prompt = prompts::fill(prompts::TIME_WINDOW, &[("query", text.to_string())]);
    let ctx = PromptContext::TimeWindow { query: text.to_string() };
    let req =
        ChatRequest::new(vec![Message::user(prompt)], ResponseContract::StructuredWindow).with_context(ctx.to_value());
    let raw = llm.chat(&req).ok()?;
    let v: Value = serde_json::from_str(strip_code_fence(&raw)).ok()?;
    let secs = |key: &str| -> Option<f64> {
        match v.get(key)? {
            Value::Number(n) => n.as_f64(),
            Value::String(s) => parse_timestamp(s).ok().or_else(|| s.parse().ok()),
            _ => None,
        }
        .filter(|x| x.is_finite() && *x >= 0.0)
    };
    if let Some(t) = secs("at") {
        return Some(Span { lo: (t - pad).max(0.0), hi: t + pad });
    }
    match (secs("start"), secs("end")) {
        (Some(a), Some(b)) if a <= b => Some(Span { lo: (a - pad).max(0.0), hi: b + pad }),
        _ => None,
    }
}

/// Time window the question refers to, padded by `pad` seconds on each
/// side. Several mentions (a "between A and B" range, for instance) give
/// the window from the earliest to the latest. The model is only asked
/// when the patterns find nothing; any failure there means no window.
pub fn extract_time_filter(text: &str, llm: Option<&dyn ChatProvider>, pad: f64) -> Result<Option<Span>> {
    if text.trim().is_empty() {
        return Err(Error::invalid("query text must be non-empty"));
    }
    if let Some(w) = pattern_window(text, pad) {
        return Ok(Some(w));
    }
    Ok(llm.and_then(|m| llm_window(text, m, pad)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct QueryConfig {
    pub engine: EngineConfig,
    pub k: usize,
    pub pad: f64,
    /// Ask the agent model for a time window when the patterns find none.
    pub llm_time_filter: bool,
}

impl Default for QueryConfig {
    fn default() -> Self {
        QueryConfig { engine: EngineConfig::default(), k: DEFAULT_K, pad: DEFAULT_PAD, llm_time_filter: false }
    }
}

pub struct Pipeline<'a> {
    pub store: &'a KnowledgeStore,
    pub embedder: &'a dyn EmbeddingProvider,
    pub agent: &'a dyn ChatProvider,
    pub tools: &'a ToolRegistry,
    pub rescuer: &'a Rescuer,
    pub config: QueryConfig,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FinalAnswer {
    pub text: String,
    pub unanswered: bool,
    pub trace: TraceDocument,
}

/// Filtered hybrid retrieval. An empty result under a time window is
/// retried without the window, and a notice says so.
pub fn retrieve(
    store: &KnowledgeStore,
    embedder: &dyn EmbeddingProvider,
    query: &Query,
    k: usize,
    notices: &mut Vec<String>,
) -> Result<Vec<RetrievalHit>> {
    let filter = query.extracted_filter.clone().unwrap_or_default();
    let out = store.hybrid_search(&query.text, embedder, &filter, k)?;
    notices.extend(out.warnings);
    if !out.hits.is_empty() || filter.window.is_none() {
        return Ok(out.hits);
    }
    let w = filter.window.expect("checked");
    notices.push(format!(
        "no segment overlaps [{}, {}]; retrieved without the time window",
        format_hms(w.lo),
        format_hms(w.hi)
    ));
    let unfiltered = TimeFilter { window: None, video_id: filter.video_id };
    let out = store.hybrid_search(&query.text, embedder, &unfiltered, k)?;
    notices.extend(out.warnings);
    Ok(out.hits)
}

impl Pipeline<'_> {
    pub fn answer(&self, mut query: Query) -> Result<FinalAnswer> {
        if query.text.trim().is_empty() {
            return Err(Error::invalid("query text must be non-empty"));
        }
        if query.extracted_filter.is_none() {
            let llm = self.config.llm_time_filter.then_some(self.agent);
            let window = extract_time_filter(&query.text, llm, self.config.pad)?;
            query.extracted_filter = Some(TimeFilter { window, video_id: query.video_id.clone() });
        }
        let mut notices = Vec::new();
        let hits = retrieve(self.store, self.embedder, &query, self.config.k, &mut notices)?;
        let ctx = RetrievalContext { query: query.clone(), hits, tool_catalog: self.tools.catalog() };
        let engine = Engine::new(self.agent, self.tools, self.rescuer, self.config.engine);
        let exec = engine.run(&ctx)?;

        let succeeded = exec.tree.leaves().iter().filter(|l| l.status == TaskStatus::Success).count();
        let failed_leaves = exec.tree.leaves().len() - succeeded;
        let (text, unanswered, passthrough) = match (&exec.error, succeeded) {
            (Some(e), _) => (format!("Unanswered: {e}"), true, true),
            (None, 0) => (exec.outcome.text().to_string(), true, true),
            (None, _) => match conclusive_synthesis(&exec.tree, &query.text, self.agent) {
                Ok(t) => (t, false, false),
                Err(e) => (format!("Unanswered: synthesis failed: {e}"), true, false),
            },
        };
        let mut events = exec.events;
        events.push(TraceEvent::Synthesized {
            answer: text.clone(),
            leaves: exec.tree.leaves().len(),
            failed_leaves,
            passthrough,
        });
        let trace = TraceDocument {
            query: query.text.clone(),
            video_id: query.video_id.clone(),
            filter: query.extracted_filter.as_ref().and_then(|f| f.window),
            retrieved: ctx
                .hits
                .iter()
                .map(|h| RetrievedRef { entry_id: h.entry.entry_id.clone(), score: h.score, source: h.source })
                .collect(),
            notices,
            events,
            tree: exec.tree.to_records(),
            answer: text.clone(),
            unanswered,
        };
        Ok(FinalAnswer { text, unanswered, trace })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn window(text: &str) -> Option<(f64, f64)> {
        pattern_window(text, DEFAULT_PAD).map(|s| (s.lo, s.hi))
    }

    #[test]
    fn spoken_and_clock_times() {
        assert_eq!(window("Who is the person at 5 minutes and 41 seconds in the video?"), Some((336.0, 346.0)));
        assert_eq!(window("Any scene changes between 03:58 and 04:02?"), Some((233.0, 247.0)));
        assert_eq!(window("What happens in [00:01:00, 00:01:30]?"), Some((55.0, 95.0)));
        assert_eq!(window("What happens at 1 hour?"), Some((3595.0, 3605.0)));
        assert_eq!(window("Why was Dolores' father being inspected?"), None);
        assert_eq!(window("He waited 5 seconds"), None);
        assert_eq!(window("At 00:00:02"), Some((0.0, 7.0)));
    }
}
