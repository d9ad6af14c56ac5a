mod common;

use std::sync::Arc;

use common::*;
use omagent_core::toolbox::{
    missing_module, rewind_args, timestamp_value, ArgKind, ArgSpec, CodeExecTool, Constraint, FailureCategory,
    FileTool, ToolCall, ToolFailure, ToolHandler, ToolOutput, ToolSpec,
};
use proptest::prelude::*;
use serde_json::{json, Map, Value};

fn rewind(
    ws: &omagent_core::workspace::Workspace,
    t0: f64,
    t1: f64,
    fps: Option<f64>,
) -> omagent_core::toolbox::ToolResult {
    let mut args = rewind_args("roy_family", t0, t1, "Does a cigarette drop to the ground?");
    if let Some(g) = fps {
        args["granularity"] = json!(g);
    }
    ws.session().unwrap().tools.invoke(&ToolCall::new("rewinder", args))
}

#[test]
fn rewinder_recovers_a_one_second_event_at_one_fps() {
    let (_dir, ws) = fixture_workspace();
    let fine = rewind(&ws, 120.0, 160.0, None);
    assert!(fine.ok);
    assert!(fine.content.contains("00:02:32") && fine.content.contains("drops"), "{}", fine.content);
    let coarse = rewind(&ws, 120.0, 160.0, Some(0.2));
    assert!(coarse.ok);
    assert!(!coarse.content.contains("drops"), "{}", coarse.content);
}

#[test]
fn rewinder_rejects_bad_windows() {
    let (_dir, ws) = fixture_workspace();
    let inverted = rewind(&ws, 160.0, 120.0, None);
    assert_eq!(inverted.failure.unwrap().category, FailureCategory::BadArgs);
    let huge = rewind(&ws, 0.0, 290.0, Some(30.0));
    assert_eq!(huge.failure.unwrap().category, FailureCategory::BadArgs);
    let tools = ws.session().unwrap().tools;
    let unknown = tools.invoke(&ToolCall::new("rewinder", rewind_args("nope", 0.0, 10.0, "look")));
    assert!(!unknown.ok);
    let text_ts = tools.invoke(&ToolCall::new(
        "rewinder",
        json!({"video_id": "roy_family", "t0": "00:02:00", "t1": "00:02:40", "instruction": "Does a cigarette drop to the ground?"}),
    ));
    assert!(text_ts.content.contains("00:02:32"), "{}", text_ts.content);
}

#[test]
fn catalog_lists_the_session_tools() {
    let (_dir, ws) = fixture_workspace();
    let names: Vec<String> = ws.session().unwrap().tools.catalog().into_iter().map(|s| s.name).collect();
    for t in ["rewinder", "web_search", "face_recognition", "file_reader", "code_exec"] {
        assert!(names.iter().any(|n| n == t), "{t} missing from {names:?}");
    }
    let doc: Value = serde_json::from_str(&ws.session().unwrap().tools.catalog_document()).unwrap();
    assert_eq!(doc.as_array().unwrap().len(), names.len());
}

#[test]
fn web_search_and_faces_use_fixture_providers() {
    let (_dir, ws) = fixture_workspace();
    let tools = ws.session().unwrap().tools;
    let hit = tools.invoke(&ToolCall::new("web_search", json!({"query": "Logan Roy media company"})));
    assert!(hit.content.contains("Waystar Royco"), "{}", hit.content);
    let miss = tools.invoke(&ToolCall::new("web_search", json!({"query": "something unrelated"})));
    assert!(miss.ok && miss.content.starts_with("No results"));
    let empty = tools.invoke(&ToolCall::new("web_search", json!({"query": "  "})));
    assert_eq!(empty.failure.unwrap().category, FailureCategory::BadArgs);

    let faces = tools.invoke(&ToolCall::new("face_recognition", json!({"frame": "roy_family@00:00:05"})));
    let parsed: Value = serde_json::from_str(&faces.content).unwrap();
    assert_eq!(parsed[0]["label"], "Roman Roy");
    let malformed = tools.invoke(&ToolCall::new("face_recognition", json!({"frame": "roy_family-5"})));
    assert_eq!(malformed.failure.unwrap().category, FailureCategory::BadArgs);
}

#[test]
fn web_search_without_provider_is_upstream() {
    let tool = omagent_core::toolbox::WebSearch::new(None);
    let args: Map<String, Value> = json!({"query": "x"}).as_object().unwrap().clone();
    assert_eq!(tool.call(&args).unwrap_err().category, FailureCategory::Upstream);
}

#[test]
fn file_reader_stays_inside_its_root() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("notes.txt"), "line one\nline two\n").unwrap();
    let tools = registry(vec![Arc::new(FileTool::new(dir.path()))]);
    let ok = tools.invoke(&ToolCall::new("file_reader", json!({"path": "notes.txt"})));
    assert!(ok.ok && ok.content.contains("2 lines") && ok.content.contains("line two"), "{}", ok.content);
    for bad in ["../etc/passwd", "/etc/passwd", "missing.txt"] {
        let r = tools.invoke(&ToolCall::new("file_reader", json!({"path": bad})));
        assert!(!r.ok, "{bad} was readable");
    }
}

#[test]
fn code_exec_reports_missing_modules() {
    if std::process::Command::new("python3").arg("--version").output().is_err() {
        return;
    }
    let dir = tempfile::tempdir().unwrap();
    let tools = registry(vec![Arc::new(CodeExecTool::new(dir.path()))]);
    let ok = tools.invoke(&ToolCall::new("code_exec", json!({"code": "print(6 * 7)"})));
    assert_eq!(ok.content.trim(), "42");
    let missing = tools.invoke(&ToolCall::new("code_exec", json!({"code": "import not_a_real_module_xyz"})));
    let f = missing.failure.unwrap();
    assert_eq!(f.category, FailureCategory::Environment);
    assert_eq!(f.missing.as_deref(), Some("not_a_real_module_xyz"));
    let crash = tools.invoke(&ToolCall::new("code_exec", json!({"code": "raise ValueError('no')"})));
    assert!(!crash.ok);
    assert_eq!(missing_module("ModuleNotFoundError: No module named 'pandas.core'"), Some("pandas".into()));
    assert_eq!(missing_module("SyntaxError: invalid syntax"), None);
}

struct Panics;

impl ToolHandler for Panics {
    fn spec(&self) -> ToolSpec {
        ToolSpec { name: "panics".into(), description: String::new(), args: vec![] }
    }

    fn call(&self, _args: &Map<String, Value>) -> Result<ToolOutput, ToolFailure> {
        panic!("handler bug")
    }
}

#[test]
fn handler_panics_become_environment_failures() {
    let tools = registry(vec![Arc::new(Panics)]);
    let r = tools.invoke(&ToolCall::new("panics", json!({})));
    let f = r.failure.unwrap();
    assert_eq!(f.category, FailureCategory::Environment);
    assert!(f.message.contains("handler bug"));
}

#[test]
fn registry_rejects_duplicates_and_bad_names() {
    let mut tools = registry(vec![Arc::new(Panics)]);
    assert!(tools.register(Arc::new(Panics)).is_err());
    let bad = ToolSpec { name: "has space".into(), description: String::new(), args: vec![] };
    assert!(tools.register_as(bad, Arc::new(Panics)).is_err());
}

fn spec_with(kind: ArgKind, constraint: Constraint, required: bool) -> ToolSpec {
    ToolSpec {
        name: "t".into(),
        description: String::new(),
        args: vec![ArgSpec::new("x", kind, required, constraint, "")],
    }
}

fn args(v: Option<Value>) -> Map<String, Value> {
    let mut m = Map::new();
    if let Some(v) = v {
        m.insert("x".into(), v);
    }
    m
}

proptest! {
    #[test]
    fn numeric_ranges_are_inclusive(x in -100.0f64..100.0, lo in -50.0f64..0.0, hi in 0.0f64..50.0) {
        let spec = spec_with(ArgKind::Number, Constraint::Range { min: Some(lo), max: Some(hi) }, true);
        prop_assert_eq!(spec.check_args(&args(Some(json!(x)))).is_ok(), lo <= x && x <= hi);
        prop_assert!(spec.check_args(&args(Some(json!(lo)))).is_ok());
        prop_assert!(spec.check_args(&args(Some(json!(hi)))).is_ok());
    }

    #[test]
    fn timestamps_accept_numbers_and_clock_text(h in 0u32..3, m in 0u32..60, s in 0u32..60) {
        let secs = f64::from(h * 3600 + m * 60 + s);
        let text = format!("{h:02}:{m:02}:{s:02}");
        prop_assert_eq!(timestamp_value(&json!(text), false).unwrap(), secs);
        prop_assert_eq!(timestamp_value(&json!(secs), false).unwrap(), secs);
        let spec = spec_with(ArgKind::Timestamp, Constraint::Range { min: Some(0.0), max: Some(3600.0) }, true);
        prop_assert_eq!(spec.check_args(&args(Some(json!(text)))).is_ok(), secs <= 3600.0);
    }

    #[test]
    fn required_and_unexpected_arguments(required in any::<bool>(), present in any::<bool>(), extra in any::<bool>()) {
        let spec = spec_with(ArgKind::Text, Constraint::FreeText, required);
        let mut a = args(present.then(|| json!("")));
        if extra {
            a.insert("y".into(), json!(1));
        }
        let ok = spec.check_args(&a).is_ok();
        prop_assert_eq!(ok, !extra && (present || !required));
        if !ok {
            prop_assert_eq!(spec.check_args(&a).unwrap_err().category, FailureCategory::BadArgs);
        }
    }

    #[test]
    fn kinds_reject_wrong_json_types(n in any::<i32>(), s in "[a-z]{0,6}") {
        let text = spec_with(ArgKind::Text, Constraint::NonEmpty, true);
        prop_assert!(text.check_args(&args(Some(json!(n)))).is_err());
        prop_assert_eq!(text.check_args(&args(Some(json!(s.clone())))).is_ok(), !s.is_empty());
        let num = spec_with(ArgKind::Number, Constraint::Positive, true);
        prop_assert!(num.check_args(&args(Some(json!(s)))).is_err());
        prop_assert_eq!(num.check_args(&args(Some(json!(n)))).is_ok(), n > 0);
    }
}
