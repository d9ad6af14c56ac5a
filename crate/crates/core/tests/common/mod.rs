#![allow(dead_code)]

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use omagent_core::engine::{Engine, EngineConfig, Execution, Rescuer};
use omagent_core::fixtures;
use omagent_core::providers::{Condition, Rule, Script, ScriptedChat, SimulatedModel};
use omagent_core::query::{Query, RetrievalContext};
use omagent_core::store::{KnowledgeEntry, KnowledgeStore, TimeFilter};
use omagent_core::task_tree::TaskStatus;
use omagent_core::timecode::Span;
use omagent_core::toolbox::{
    ArgKind, ArgSpec, Constraint, ToolFailure, ToolHandler, ToolOutput, ToolRegistry, ToolSpec,
};
use omagent_core::video::Frame;
use omagent_core::workspace::Workspace;
use serde_json::{json, Map, Value};
use tempfile::TempDir;

pub fn frame(t: f64, feature: Vec<f32>) -> Frame {
    Frame { timestamp: t, feature, image_ref: None, annotated_ref: None, annotations: vec![], visual: None }
}

/// Fixture files written and both videos ingested.
pub fn fixture_workspace() -> (TempDir, Workspace) {
    let dir = tempfile::tempdir().unwrap();
    let paths = fixtures::write_all(dir.path()).unwrap();
    let mut ws = Workspace::open(dir.path()).unwrap();
    for m in &paths.manifests {
        let report = ws.ingest(m, None).unwrap();
        assert_eq!(report.failed(), 0, "{report:?}");
    }
    (dir, ws)
}

/// What the scripted conqueror says about one task.
#[derive(Debug, Clone)]
pub enum Plan {
    Answer(String),
    Tool(String, Value),
    Split(Vec<String>),
    /// The divider declines.
    Refuse(String),
}

pub fn answer(a: &str) -> Plan {
    Plan::Answer(a.into())
}

pub fn split(tasks: &[&str]) -> Plan {
    Plan::Split(tasks.iter().map(|t| t.to_string()).collect())
}

pub fn lookup(key: &str) -> Plan {
    Plan::Tool("lookup".into(), json!({ "key": key }))
}

pub type Table = Vec<(String, Plan)>;

pub fn script_for(table: &[(String, Plan)]) -> Script {
    let mut s = Script::default();
    for (task, plan) in table {
        let when = vec![Condition::task_equals(task.clone())];
        match plan {
            Plan::Answer(a) => {
                s.rule(Rule::new("verdict", when, json!({"type": "direct_answer", "answer": a})));
            }
            Plan::Tool(name, args) => {
                s.rule(Rule::new("verdict", when, json!({"type": "requires_tool", "tool": name, "args": args})));
            }
            Plan::Split(tasks) => {
                s.rule(Rule::new("verdict", when.clone(), json!({"type": "too_complex", "reason": "several steps"})));
                s.rule(Rule::new("plan", when, json!({"success": true, "tasks": tasks})));
            }
            Plan::Refuse(reason) => {
                s.rule(Rule::new("verdict", when.clone(), json!({"type": "too_complex", "reason": "unclear"})));
                s.rule(Rule::new("plan", when, json!({"success": false, "reason": reason})));
            }
        }
    }
    s
}

pub fn scripted_agent(table: &[(String, Plan)]) -> ScriptedChat {
    ScriptedChat::new("agent", script_for(table)).with_fallback(Arc::new(SimulatedModel::default()))
}

/// Independent model of the loop on a scripted table: visits tasks
/// depth-first, stops dividing past `max_depth`, and reports the order in
/// which tasks were judged plus every created node's final status in
/// preorder.
pub struct Reference {
    pub judged: Vec<String>,
    pub statuses: Vec<(String, TaskStatus)>,
    pub root: TaskStatus,
}

pub fn reference(table: &[(String, Plan)], known_keys: &[&str], root: &str, max_depth: u32) -> Reference {
    fn visit(
        table: &BTreeMap<&str, &Plan>,
        keys: &[&str],
        task: &str,
        depth: u32,
        max_depth: u32,
        judged: &mut Vec<String>,
        statuses: &mut Vec<(String, TaskStatus)>,
    ) -> TaskStatus {
        judged.push(task.to_string());
        let slot = statuses.len();
        statuses.push((task.to_string(), TaskStatus::Pending));
        let status = match table.get(task).copied() {
            Some(Plan::Answer(_)) => TaskStatus::Success,
            Some(Plan::Tool(_, args)) => {
                if keys.contains(&args["key"].as_str().unwrap_or("")) {
                    TaskStatus::Success
                } else {
                    TaskStatus::Failed
                }
            }
            Some(Plan::Refuse(_)) => TaskStatus::Failed,
            // a single subtask is no division at all
            Some(Plan::Split(subs)) if subs.len() < 2 => TaskStatus::Failed,
            Some(Plan::Split(subs)) => {
                if depth + 1 > max_depth {
                    for s in subs {
                        statuses.push((s.clone(), TaskStatus::TooDeep));
                    }
                    TaskStatus::Failed
                } else {
                    let mut any = false;
                    for s in subs {
                        any |= visit(table, keys, s, depth + 1, max_depth, judged, statuses) == TaskStatus::Success;
                    }
                    if any {
                        TaskStatus::Success
                    } else {
                        TaskStatus::Failed
                    }
                }
            }
            None => panic!("task {task:?} missing from the table"),
        };
        statuses[slot].1 = status;
        status
    }
    let map: BTreeMap<&str, &Plan> = table.iter().map(|(t, p)| (t.as_str(), p)).collect();
    let (mut judged, mut statuses) = (Vec::new(), Vec::new());
    let root = visit(&map, known_keys, root, 0, max_depth, &mut judged, &mut statuses);
    Reference { judged, statuses, root }
}

/// The engine's run in the reference's terms.
pub fn observed(exec: &Execution) -> Reference {
    use omagent_core::trace::TraceEvent;
    let name = |id| exec.tree.node(id).unwrap().description.clone();
    Reference {
        judged: exec
            .events
            .iter()
            .filter_map(|e| match e {
                TraceEvent::Conquered { node, .. } => Some(name(*node)),
                _ => None,
            })
            .collect(),
        statuses: exec.tree.preorder().into_iter().map(|id| (name(id), exec.tree.node(id).unwrap().status)).collect(),
        root: exec.tree.node(exec.tree.root()).unwrap().status,
    }
}

pub fn context(query: &str, tools: &ToolRegistry) -> RetrievalContext {
    RetrievalContext { query: Query::new(query, None).unwrap(), hits: vec![], tool_catalog: tools.catalog() }
}

pub fn run_engine(agent: &ScriptedChat, tools: &ToolRegistry, config: EngineConfig, query: &str) -> Execution {
    let rescuer = Rescuer::new(None, std::time::Duration::from_millis(1));
    Engine::new(agent, tools, &rescuer, config).run(&context(query, tools)).unwrap()
}

/// `lookup(key)` answers from a fixed table and fails `not_found` otherwise.
pub struct Lookup(pub BTreeMap<String, String>);

impl ToolHandler for Lookup {
    fn spec(&self) -> ToolSpec {
        ToolSpec {
            name: "lookup".into(),
            description: "looks a key up".into(),
            args: vec![ArgSpec::new("key", ArgKind::Text, true, Constraint::NonEmpty, "key")],
        }
    }

    fn call(&self, args: &Map<String, Value>) -> Result<ToolOutput, ToolFailure> {
        let key = args["key"].as_str().unwrap_or_default();
        self.0
            .get(key)
            .map(|v| ToolOutput { content: v.clone(), artifacts: vec![] })
            .ok_or_else(|| ToolFailure::not_found(format!("no entry for {key}")))
    }
}

/// Fails upstream `failures` times, then succeeds.
pub struct Flaky {
    pub failures: usize,
    pub calls: AtomicUsize,
}

impl ToolHandler for Flaky {
    fn spec(&self) -> ToolSpec {
        ToolSpec { name: "flaky".into(), description: "sometimes down".into(), args: vec![] }
    }

    fn call(&self, _args: &Map<String, Value>) -> Result<ToolOutput, ToolFailure> {
        let n = self.calls.fetch_add(1, Ordering::SeqCst);
        if n < self.failures {
            Err(ToolFailure::upstream("503 from service"))
        } else {
            Ok(ToolOutput { content: format!("ok after {n} failures"), artifacts: vec![] })
        }
    }
}

/// A clip tool over `[0, 60]` taking `t0`/`t1` timestamps.
pub struct Clip;

impl ToolHandler for Clip {
    fn spec(&self) -> ToolSpec {
        let ts = |n: &str| {
            ArgSpec::new(n, ArgKind::Timestamp, true, Constraint::Range { min: Some(0.0), max: None }, "time")
        };
        ToolSpec { name: "clip".into(), description: "cuts a clip".into(), args: vec![ts("t0"), ts("t1")] }
    }

    fn call(&self, args: &Map<String, Value>) -> Result<ToolOutput, ToolFailure> {
        let t = |k: &str| omagent_core::toolbox::timestamp_value(&args[k], false);
        match (t("t0"), t("t1")) {
            (Ok(a), Ok(b)) if a < b && b <= 60.0 => {
                Ok(ToolOutput { content: format!("clip {a}-{b}"), artifacts: vec![] })
            }
            (Ok(a), Ok(b)) => Err(ToolFailure::bad_args(format!("bad span {a}-{b}"))),
            (Err(e), _) | (_, Err(e)) => Err(ToolFailure::bad_args(e)),
        }
    }

    fn time_bounds(&self, _args: &Map<String, Value>) -> Option<(f64, f64)> {
        Some((0.0, 60.0))
    }
}

pub fn registry(handlers: Vec<Arc<dyn ToolHandler>>) -> ToolRegistry {
    let mut r = ToolRegistry::new();
    for h in handlers {
        r.register(h).unwrap();
    }
    r
}

pub fn lookup_table(pairs: &[(&str, &str)]) -> Arc<dyn ToolHandler> {
    Arc::new(Lookup(pairs.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect()))
}

pub const HEIST: &str = "Plan the museum visit";

/// Two levels of division (one of them into four subtasks), all three
/// verdicts, a failing tool, a declined division and a depth-limit hit at
/// `max_depth` 2.
pub fn heist_table() -> Table {
    vec![
        (HEIST.into(), split(&["Survey the building", "Book the tickets", "Plan the route home"])),
        (
            "Survey the building".into(),
            split(&["Count the entrances", "Find the cafe", "Check the opening hours", "Locate the lockers"]),
        ),
        ("Count the entrances".into(), answer("three entrances")),
        ("Find the cafe".into(), lookup("cafe")),
        ("Check the opening hours".into(), lookup("hours")),
        ("Locate the lockers".into(), split(&["Ask the front desk", "Read the floor plan"])),
        ("Ask the front desk".into(), answer("lockers are downstairs")),
        ("Read the floor plan".into(), answer("lockers by the stairs")),
        ("Book the tickets".into(), answer("two adult tickets")),
        ("Plan the route home".into(), Plan::Refuse("no transit data".into())),
    ]
}

pub fn heist_tools() -> ToolRegistry {
    registry(vec![lookup_table(&[("cafe", "the cafe is on the second floor")])])
}

/// Piecewise-constant feature stream with jitter and irregular timestamps.
pub fn random_stream(rng: &mut impl rand::Rng) -> Vec<Frame> {
    let dim = rng.gen_range(2..=8);
    let n = rng.gen_range(2..=300);
    let mut t = rng.gen_range(0.0..50.0);
    let mut base: Vec<f32> = (0..dim).map(|_| rng.gen_range(0.0..1.0)).collect();
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        if rng.gen_bool(0.08) {
            base = (0..dim).map(|_| rng.gen_range(0.0..1.0)).collect();
        }
        let jitter = rng.gen_range(0.0..0.15);
        let feature = base.iter().map(|&b| b + rng.gen_range(0.0..=jitter)).collect();
        out.push(frame(t, feature));
        t += if rng.gen_bool(0.9) { 1.0 } else { rng.gen_range(0.01..4.0) };
    }
    out
}

/// Brute-force segmentation: every change above the threshold is a
/// candidate cut; cuts are kept left to right while the span they close is
/// long enough, and a short tail folds into the span before it.
pub fn scene_oracle(frames: &[Frame], threshold: f64, min_len: f64) -> Vec<Span> {
    let tv = |a: &[f32], b: &[f32]| {
        let (sa, sb) = (a.iter().map(|&x| x as f64).sum::<f64>(), b.iter().map(|&x| x as f64).sum::<f64>());
        let mut d = 0.0;
        for (x, y) in a.iter().zip(b) {
            let px = if sa > 0.0 { *x as f64 / sa } else { 0.0 };
            let py = if sb > 0.0 { *y as f64 / sb } else { 0.0 };
            d += (px - py).abs();
        }
        d / 2.0
    };
    let first = frames[0].timestamp;
    let last = frames[frames.len() - 1].timestamp;
    let mut kept: Vec<f64> = Vec::new();
    let mut lo = first;
    for w in frames.windows(2) {
        if tv(&w[0].feature, &w[1].feature) > threshold && w[1].timestamp - lo >= min_len {
            kept.push(w[1].timestamp);
            lo = w[1].timestamp;
        }
    }
    if last - lo < min_len && !kept.is_empty() {
        kept.pop();
    }
    let mut bounds = vec![first];
    bounds.extend(kept);
    bounds.push(last);
    bounds.windows(2).map(|w| Span { lo: w[0], hi: w[1] }).collect()
}

/// Spans tile `[first, last]` with no gaps or overlaps.
pub fn check_tiling(spans: &[Span], frames: &[Frame], tol: f64) -> Result<(), String> {
    let first = frames[0].timestamp;
    let last = frames[frames.len() - 1].timestamp;
    if spans.is_empty() {
        return Err("no spans".into());
    }
    if (spans[0].lo - first).abs() > tol || (spans[spans.len() - 1].hi - last).abs() > tol {
        return Err(format!("spans do not reach [{first}, {last}]"));
    }
    for w in spans.windows(2) {
        if (w[0].hi - w[1].lo).abs() > tol {
            return Err(format!("gap or overlap between {:?} and {:?}", w[0], w[1]));
        }
    }
    if spans.iter().any(|s| s.hi < s.lo) {
        return Err("inverted span".into());
    }
    Ok(())
}

pub const VIDEOS: [&str; 3] = ["v0", "v1", "v2"];

fn unit_f32(v: Vec<f32>) -> Vec<f32> {
    let n = v.iter().map(|x| f64::from(*x).powi(2)).sum::<f64>().sqrt() as f32;
    v.into_iter().map(|x| x / n).collect()
}

/// `n` entries over three videos; about a fifth reuse one of a handful of
/// shared embeddings so exact score ties are common.
pub fn random_entries(rng: &mut impl rand::Rng, n: usize, dim: usize) -> Vec<KnowledgeEntry> {
    let shared: Vec<Vec<f32>> =
        (0..5).map(|_| unit_f32((0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect())).collect();
    let mut clock = [0.0f64; 3];
    (0..n)
        .map(|i| {
            let v = rng.gen_range(0..3);
            let lo = clock[v];
            let hi = lo + rng.gen_range(1.0..40.0);
            clock[v] = hi;
            let embedding = if rng.gen_bool(0.2) {
                shared[rng.gen_range(0..shared.len())].clone()
            } else {
                unit_f32((0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect())
            };
            KnowledgeEntry {
                entry_id: format!("e{i:05}"),
                video_id: VIDEOS[v].into(),
                start_ts: lo,
                end_ts: hi,
                caption_text: format!("segment {i}"),
                embedding,
            }
        })
        .collect()
}

pub fn store_of(entries: &[KnowledgeEntry], dim: usize) -> KnowledgeStore {
    let store = KnowledgeStore::in_memory(dim).unwrap();
    for e in entries {
        store.upsert(e.clone()).unwrap();
    }
    store
}

/// Overlap of positive length with the window, or containment of a
/// single-instant window, plus the video restriction.
pub fn admitted(e: &KnowledgeEntry, video: Option<&str>, window: Option<(f64, f64)>) -> bool {
    if let Some(v) = video {
        if e.video_id != v {
            return false;
        }
    }
    match window {
        None => true,
        Some((a, b)) if a == b => e.start_ts <= a && a <= e.end_ts,
        Some((a, b)) => e.start_ts < b && a < e.end_ts,
    }
}

/// Scores every admitted entry and sorts by (score desc, id asc).
pub fn brute_top_k(
    entries: &[KnowledgeEntry],
    query: &[f32],
    video: Option<&str>,
    window: Option<(f64, f64)>,
    k: usize,
) -> Vec<(String, f64)> {
    let qn = query.iter().map(|&x| f64::from(x) * f64::from(x)).sum::<f64>().sqrt();
    let mut scored: Vec<(String, f64)> = entries
        .iter()
        .filter(|e| admitted(e, video, window))
        .map(|e| {
            let dot: f64 = e.embedding.iter().zip(query).map(|(&a, &b)| f64::from(a) * f64::from(b)).sum();
            (e.entry_id.clone(), dot / qn)
        })
        .collect();
    scored.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
    scored.truncate(k);
    scored
}

pub fn filter_of(video: Option<&str>, window: Option<(f64, f64)>) -> TimeFilter {
    TimeFilter { video_id: video.map(str::to_string), window: window.map(|(lo, hi)| Span { lo, hi }) }
}

pub enum ScoringCase {
    Times(&'static str, &'static [&'static str], bool),
    Labels(&'static str, &'static [char], bool),
}

/// Hand-checked predictions against ground truth, with the expected verdict.
pub fn scoring_cases() -> Vec<ScoringCase> {
    use ScoringCase::*;
    vec![
        Times("00:02:32", &["00:02:32"], true),
        Times("00:45:54", &["00:45:56"], true),
        Times("[00:00:00, 00:00:10]", &["[00:00:05, 00:00:15]"], false),
        Times("00:45:53", &["00:45:56"], false),
        Times("00:45:58", &["00:45:56"], true),
        Times("00:45:58.5", &["00:45:56"], false),
        Times("02:32", &["00:02:32"], true),
        Times("1:02:32", &["01:02:33"], true),
        Times("[00:00:00, 00:00:10]", &["[00:00:00, 00:00:10]"], true),
        Times("[00:00:00, 00:01:40]", &["[00:00:00, 00:01:31]"], true),
        // IoU of exactly 0.9 is not above the threshold
        Times("[00:00:00, 00:01:40]", &["[00:00:00, 00:01:30]"], false),
        Times("[00:00:00, 00:01:40]", &["[00:00:00, 00:01:29]"], false),
        Times("[00:02:18, 00:02:45]", &["00:02:32"], true),
        Times("[00:02:00, 00:02:40]", &["00:02:32"], false),
        Times("00:04:12", &["[00:04:10, 00:04:13]"], true),
        Times("00:04:20", &["[00:04:10, 00:04:30]"], false),
        Times("The cigarette drops at 00:02:33.", &["00:02:32"], true),
        Times("no idea", &["00:02:32"], false),
        Times("00:10:00", &["00:02:32", "00:10:01"], true),
        Times("[00:04:10, 00:04:29]", &["[00:04:10, 00:04:30]"], true),
        Times("[01:10, 01:29]", &["[00:01:10, 00:01:30]"], true),
        Times("[00:00:10, 00:00:20]", &["[00:00:30, 00:00:40]"], false),
        Times("[00:44:05, 00:44:18]", &["00:44:12"], true),
        Labels("a", &['a'], true),
        Labels("b, d", &['b', 'd'], true),
        Labels("b", &['b', 'd'], false),
        Labels("The answer is c.", &['c'], true),
        Labels("b", &['a', 'b', 'c'], false),
        Labels("I pick d and b", &['b', 'd'], true),
        Labels("none of them", &['a'], false),
    ]
}

/// Runs one case through the public scorers; returns (got, want).
pub fn run_scoring_case(case: &ScoringCase) -> (bool, bool) {
    use omagent_core::eval::{score_choice, score_localization};
    use omagent_core::timecode::parse_time_ref;
    match case {
        ScoringCase::Times(pred, truths, want) => {
            let truths: Vec<_> = truths.iter().map(|t| parse_time_ref(t).unwrap()).collect();
            (score_localization(pred, &truths).correct, *want)
        }
        ScoringCase::Labels(pred, truth, want) => (score_choice(pred, truth, &['a', 'b', 'c', 'd']).correct, *want),
    }
}
