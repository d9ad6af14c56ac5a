mod common;

use std::sync::atomic::AtomicUsize;
use std::sync::Arc;
use std::time::{Duration, Instant};

use common::*;
use omagent_core::engine::{
    parse_plan, parse_verdict, ConquerorVerdict, DncOutcome, Engine, EngineConfig, ParseMode, Rescuer, DEPTH_EXCEEDED,
};
use omagent_core::providers::{ChatProvider, ChatRequest, ProviderError, Script, ScriptedChat};
use omagent_core::task_tree::TaskStatus;
use omagent_core::toolbox::{CodeExecTool, FailureCategory, Installer, ModuleInstaller, ToolCall, ToolFailure};
use omagent_core::trace::TraceEvent;
use proptest::prelude::*;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use serde_json::json;

fn cfg(max_depth: u32) -> EngineConfig {
    EngineConfig { max_depth, ..EngineConfig::default() }
}

#[test]
fn heist_matches_reference() {
    let table = heist_table();
    let exec = run_engine(&scripted_agent(&table), &heist_tools(), cfg(2), HEIST);
    let want = reference(&table, &["cafe"], HEIST, 2);
    let got = observed(&exec);
    assert_eq!(got.judged, want.judged);
    assert_eq!(got.statuses, want.statuses);
    assert_eq!(got.root, TaskStatus::Success);
    assert_eq!(exec.error, None);

    let lockers = exec.tree.nodes().find(|n| n.description == "Locate the lockers").unwrap();
    assert_eq!(lockers.failure_reason.as_deref(), Some(DEPTH_EXCEEDED));
    assert_eq!(exec.events.iter().filter(|e| matches!(e, TraceEvent::DepthExceeded { .. })).count(), 1);
    assert_eq!(exec.events.iter().filter(|e| matches!(e, TraceEvent::Divided { success: true, .. })).count(), 3);
}

#[test]
fn two_level_decomposition_builds_six_nodes() {
    let table: Table = vec![
        ("root".into(), split(&["a", "b", "c"])),
        ("a".into(), answer("1")),
        ("b".into(), split(&["b1", "b2"])),
        ("b1".into(), answer("2")),
        ("b2".into(), answer("3")),
        ("c".into(), answer("4")),
    ];
    let exec = run_engine(&scripted_agent(&table), &heist_tools(), cfg(4), "root");
    assert_eq!(exec.tree.len(), 6);
    assert!(exec.tree.nodes().all(|n| n.status == TaskStatus::Success));
    assert_eq!(observed(&exec).judged, ["root", "a", "b", "b1", "b2", "c"]);
    assert_eq!(observed(&exec).judged, reference(&table, &[], "root", 4).judged);
}

#[test]
fn depth_zero_forbids_division() {
    let table: Table = vec![("Do everything".into(), split(&["part one", "part two"]))];
    let exec = run_engine(&scripted_agent(&table), &heist_tools(), cfg(0), "Do everything");
    assert_eq!(exec.outcome, DncOutcome::Unresolved(DEPTH_EXCEEDED.to_string()));
    let root = exec.tree.node(exec.tree.root()).unwrap();
    assert_eq!(root.status, TaskStatus::Failed);
    let children: Vec<TaskStatus> = root.children.iter().map(|&c| exec.tree.node(c).unwrap().status).collect();
    assert_eq!(children, vec![TaskStatus::TooDeep, TaskStatus::TooDeep]);
}

#[test]
fn direct_answer_at_root() {
    let table: Table = vec![("What is two plus two?".into(), answer("4"))];
    let exec = run_engine(&scripted_agent(&table), &heist_tools(), cfg(4), "What is two plus two?");
    assert_eq!(exec.outcome.text(), "4");
    assert_eq!(exec.tree.len(), 1);
}

#[test]
fn later_siblings_see_earlier_results() {
    let table: Table = vec![("root".into(), split(&["first", "second"])), ("first".into(), answer("alpha"))];
    let mut script = script_for(&table);
    // second echoes what it was shown about first
    script.rule(omagent_core::providers::Rule::new(
        "verdict",
        vec![omagent_core::providers::Condition::task_equals("second")],
        json!({"type": "direct_answer", "answer": "saw {{/siblings/0/content}}"}),
    ));
    let agent = ScriptedChat::new("agent", script);
    let exec = run_engine(&agent, &heist_tools(), cfg(4), "root");
    let second = exec.tree.nodes().find(|n| n.description == "second").unwrap();
    assert_eq!(second.result.as_ref().unwrap().content, "saw alpha");
}

#[test]
fn all_children_failing_fails_parent() {
    let table: Table = vec![
        ("root".into(), split(&["a", "b"])),
        ("a".into(), lookup("missing")),
        ("b".into(), Plan::Refuse("cannot".into())),
    ];
    let exec = run_engine(&scripted_agent(&table), &heist_tools(), cfg(4), "root");
    assert_eq!(exec.outcome, DncOutcome::Unresolved("every subtask failed".into()));
}

#[test]
fn provider_error_aborts_with_partial_tree() {
    let table: Table = vec![("root".into(), split(&["a", "b"])), ("a".into(), answer("x"))];
    // no fallback: "b" has no rule
    let agent = ScriptedChat::new("agent", script_for(&table));
    let rescuer = Rescuer::default();
    let tools = heist_tools();
    let exec = Engine::new(&agent, &tools, &rescuer, cfg(4)).run(&context("root", &tools)).unwrap();
    assert!(exec.error.as_deref().unwrap().contains("no script"), "{:?}", exec.error);
    assert!(exec.tree.nodes().all(|n| n.status != TaskStatus::Running));
    let a = exec.tree.nodes().find(|n| n.description == "a").unwrap();
    assert_eq!(a.status, TaskStatus::Success);
}

#[test]
fn upstream_failures_back_off_then_succeed() {
    let flaky = Arc::new(Flaky { failures: 2, calls: AtomicUsize::new(0) });
    let tools = registry(vec![flaky.clone()]);
    let table: Table = vec![("ping".into(), Plan::Tool("flaky".into(), json!({})))];
    let agent = scripted_agent(&table);
    let rescuer = Rescuer::new(None, Duration::from_millis(20));
    let start = Instant::now();
    let exec = Engine::new(&agent, &tools, &rescuer, cfg(4)).run(&context("ping", &tools)).unwrap();
    // 20 ms then 40 ms
    assert!(start.elapsed() >= Duration::from_millis(60));
    assert_eq!(exec.outcome.text(), "ok after 2 failures");
    let rescues: Vec<u32> = exec
        .events
        .iter()
        .filter_map(|e| match e {
            TraceEvent::Rescued { attempt, category: FailureCategory::Upstream, repaired: true, .. } => Some(*attempt),
            _ => None,
        })
        .collect();
    assert_eq!(rescues, vec![1, 2]);
}

#[test]
fn rescue_attempts_are_capped() {
    let flaky = Arc::new(Flaky { failures: 100, calls: AtomicUsize::new(0) });
    let tools = registry(vec![flaky.clone()]);
    let table: Table = vec![("ping".into(), Plan::Tool("flaky".into(), json!({})))];
    let exec = run_engine(&scripted_agent(&table), &tools, cfg(4), "ping");
    assert_eq!(flaky.calls.load(std::sync::atomic::Ordering::SeqCst), 4);
    match &exec.outcome {
        DncOutcome::Unresolved(r) => assert!(r.contains("after 3 repair attempts"), "{r}"),
        other => panic!("{other:?}"),
    }
}

#[test]
fn bad_args_are_amended() {
    let tools = registry(vec![Arc::new(Clip)]);
    let table: Table = vec![("cut".into(), Plan::Tool("clip".into(), json!({"t0": "0:50", "t1": "99"})))];
    let exec = run_engine(&scripted_agent(&table), &tools, cfg(4), "cut");
    // t1 clamped to the 60 s bound
    assert_eq!(exec.outcome.text(), "clip 50-60");
    assert!(exec
        .events
        .iter()
        .any(|e| matches!(e, TraceEvent::Rescued { category: FailureCategory::BadArgs, repaired: true, .. })));
}

#[test]
fn not_found_gives_up_immediately() {
    let tools = heist_tools();
    let table: Table = vec![("find".into(), lookup("nothing"))];
    let exec = run_engine(&scripted_agent(&table), &tools, cfg(4), "find");
    let invoked = exec.events.iter().filter(|e| matches!(e, TraceEvent::ToolInvoked { .. })).count();
    assert_eq!(invoked, 1);
    assert_eq!(exec.tree.node(exec.tree.root()).unwrap().status, TaskStatus::Failed);
}

#[test]
fn unknown_tool_is_not_found() {
    let tools = heist_tools();
    let table: Table = vec![("x".into(), Plan::Tool("teleport".into(), json!({})))];
    let exec = run_engine(&scripted_agent(&table), &tools, cfg(4), "x");
    let failure = exec.events.iter().find_map(|e| match e {
        TraceEvent::ToolInvoked { failure: Some(f), .. } => Some(f.clone()),
        _ => None,
    });
    assert_eq!(failure.unwrap().category, FailureCategory::NotFound);
}

struct Recording(std::sync::Mutex<Vec<String>>);

impl Installer for Recording {
    fn install(&self, package: &str) -> Result<String, String> {
        self.0.lock().unwrap().push(package.to_string());
        Ok(format!("installed {package}"))
    }
}

#[test]
fn environment_failures_use_the_installer() {
    let rec = Arc::new(Recording(Default::default()));
    let rescuer = Rescuer::new(Some(rec.clone()), Duration::from_millis(1));
    let tools = registry(vec![lookup_table(&[])]);
    let call = ToolCall::new("lookup", json!({"key": "k"}));
    let failure = ToolFailure { missing: Some("pandas".into()), ..ToolFailure::environment("No module named pandas") };
    let out = rescuer.rescue(&tools, &call, &failure, 1);
    assert!(out.repaired);
    assert_eq!(out.retry_payload, Some(call.clone()));
    assert_eq!(*rec.0.lock().unwrap(), vec!["pandas".to_string()]);

    let bare = Rescuer::new(None, Duration::from_millis(1)).rescue(&tools, &call, &failure, 1);
    assert!(!bare.repaired);
}

#[test]
fn module_installer_repairs_code_exec() {
    let sandbox = tempfile::tempdir().unwrap();
    let python = std::process::Command::new("python3").arg("--version").output();
    if python.is_err() {
        eprintln!("python3 unavailable; skipping");
        return;
    }
    let modules = [("fancymath".to_string(), "def double(x):\n    return 2 * x\n".to_string())].into_iter().collect();
    let installer: Arc<dyn Installer> = Arc::new(ModuleInstaller::new(sandbox.path().to_path_buf(), modules));
    let tools = registry(vec![Arc::new(CodeExecTool::new(sandbox.path().to_path_buf()))]);
    let table: Table = vec![(
        "compute".into(),
        Plan::Tool("code_exec".into(), json!({"code": "import fancymath\nprint(fancymath.double(21))"})),
    )];
    let agent = scripted_agent(&table);
    let rescuer = Rescuer::new(Some(installer), Duration::from_millis(1));
    let exec = Engine::new(&agent, &tools, &rescuer, cfg(4)).run(&context("compute", &tools)).unwrap();
    assert_eq!(exec.outcome.text().trim(), "42");
    assert!(exec
        .events
        .iter()
        .any(|e| matches!(e, TraceEvent::Rescued { category: FailureCategory::Environment, repaired: true, .. })));
}

#[test]
fn verdict_parsing_modes() {
    let json_tool = r#"{"type":"requires_tool","tool":{"name":"rewinder","args":{"t0":"00:01:00"}}}"#;
    assert!(matches!(parse_verdict(json_tool, ParseMode::Strict).unwrap(), ConquerorVerdict::RequiresTool { .. }));
    let prose = "This is a direct answer: 42";
    assert!(parse_verdict(prose, ParseMode::Strict).is_err());
    assert_eq!(
        parse_verdict(prose, ParseMode::Lenient).unwrap(),
        ConquerorVerdict::DirectAnswer { answer: "42".into() }
    );
    let wrapped = "Sure. {\"type\": \"too_complex\", \"reason\": \"two parts\"} Hope that helps.";
    assert!(matches!(parse_verdict(wrapped, ParseMode::Lenient).unwrap(), ConquerorVerdict::TooComplex { .. }));
    let degenerate = parse_plan(r#"{"success": true, "tasks": ["only one"]}"#, ParseMode::Strict).unwrap();
    assert!(!degenerate.success);
    assert!(parse_plan("not json", ParseMode::Strict).is_err());
}

struct Prose;

impl ChatProvider for Prose {
    fn name(&self) -> &str {
        "prose"
    }

    fn complete(&self, _req: &ChatRequest) -> Result<String, ProviderError> {
        Ok("I think this calls for a direct answer: blue".into())
    }
}

#[test]
fn lenient_engine_accepts_prose() {
    let tools = heist_tools();
    let rescuer = Rescuer::default();
    let strict = Engine::new(&Prose, &tools, &rescuer, cfg(4)).run(&context("sky colour", &tools)).unwrap();
    assert!(strict.error.is_some());
    let lenient_cfg = EngineConfig { verdict_parser: ParseMode::Lenient, ..cfg(4) };
    let lenient = Engine::new(&Prose, &tools, &rescuer, lenient_cfg).run(&context("sky colour", &tools)).unwrap();
    assert_eq!(lenient.outcome.text(), "blue");
}

#[test]
fn empty_script_without_fallback_names_the_digest() {
    let agent = ScriptedChat::new("agent", Script::default());
    let req = ChatRequest::new(
        vec![omagent_core::providers::Message::user("hi")],
        omagent_core::providers::ResponseContract::FreeText,
    );
    match agent.chat(&req) {
        Err(ProviderError::MissingScript { digest, .. }) => assert_eq!(digest.len(), 64),
        other => panic!("{other:?}"),
    }
}

/// Random tables: every task gets a verdict; splits nest up to four deep.
fn random_table(seed: u64) -> (Table, String) {
    let mut rng = StdRng::seed_from_u64(seed);
    let mut table = Table::new();
    let mut next = 0;
    let mut queue = vec![(format!("t{next}"), 0u32)];
    next += 1;
    while let Some((task, level)) = queue.pop() {
        let roll: f64 = rng.gen();
        let plan = if level < 4 && roll < 0.45 {
            let n = rng.gen_range(1..=4);
            let subs: Vec<String> = (0..n).map(|i| format!("t{}", next + i)).collect();
            next += n;
            for s in subs.iter().rev() {
                queue.push((s.clone(), level + 1));
            }
            Plan::Split(subs)
        } else if roll < 0.7 {
            answer("done")
        } else if roll < 0.85 {
            lookup(if rng.gen_bool(0.5) { "cafe" } else { "gone" })
        } else {
            Plan::Refuse("no".into())
        };
        table.push((task, plan));
    }
    (table, "t0".into())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn engine_matches_reference_on_random_scripts(seed in any::<u64>(), max_depth in 0u32..5) {
        let (table, root) = random_table(seed);
        let exec = run_engine(&scripted_agent(&table), &heist_tools(), cfg(max_depth), &root);
        let want = reference(&table, &["cafe"], &root, max_depth);
        let got = observed(&exec);
        prop_assert_eq!(got.judged, want.judged);
        prop_assert_eq!(got.statuses, want.statuses);
        prop_assert_eq!(got.root, want.root);
        let max_seen = exec.tree.nodes().filter(|n| n.status != TaskStatus::TooDeep).map(|n| n.depth).max().unwrap();
        prop_assert!(max_seen <= max_depth);
        let branching = table.iter().map(|(_, p)| if let Plan::Split(s) = p { s.len() } else { 1 }).max().unwrap().max(2);
        let calls = exec.events.iter().filter(|e| matches!(e, TraceEvent::Conquered { .. })).count();
        prop_assert!(calls <= branching.pow(max_depth + 1));
    }
}
