//! Tool registry and invocation.
//!
//! Every invocation ends in a [`ToolResult`]: handler errors, schema
//! violations, unknown tools and even handler panics come back as
//! categorized failures, which is what the rescuer branches on.

mod code;
mod file;
mod rewinder;
mod search;

use std::collections::HashMap;
use std::fmt;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::{Error, Result};
use crate::providers::FrameRef;
use crate::task_tree::Artifact;
use crate::timecode::{parse_timestamp, parse_timestamp_lenient};

pub use code::{missing_module, CodeExecTool, CommandInstaller, Installer, ModuleInstaller};
pub use file::FileTool;
pub use rewinder::{rewind_args, RewindRequest, Rewinder, DEFAULT_GRANULARITY};
pub use search::{FaceRecognition, WebSearch};

/// Semantic type of a tool argument.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArgKind {
    Text,
    /// Seconds as a number, or `HH:MM:SS` / `MM:SS` text.
    Timestamp,
    Number,
    Identifier,
    /// `video_id@HH:MM:SS`.
    FrameRef,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Constraint {
    /// Any text, including empty.
    FreeText,
    NonEmpty,
    /// Inclusive bounds on the numeric value (timestamps in seconds).
    Range {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        min: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        max: Option<f64>,
    },
    Positive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArgSpec {
    pub name: String,
    pub kind: ArgKind,
    pub required: bool,
    pub constraint: Constraint,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub description: String,
}

impl ArgSpec {
    pub fn new(name: &str, kind: ArgKind, required: bool, constraint: Constraint, description: &str) -> Self {
        ArgSpec { name: name.to_string(), kind, required, constraint, description: description.to_string() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToolSpec {
    pub name: String,
    pub description: String,
    pub args: Vec<ArgSpec>,
}

impl ToolSpec {
    pub fn validate(&self) -> Result<()> {
        let ident = |s: &str| !s.is_empty() && s.chars().all(|c| c.is_ascii_alphanumeric() || c == '_');
        if !ident(&self.name) {
            return Err(Error::invalid(format!("tool name {:?} is not an identifier", self.name)));
        }
        let mut seen = std::collections::BTreeSet::new();
        for a in &self.args {
            if !ident(&a.name) || !seen.insert(a.name.as_str()) {
                return Err(Error::invalid(format!("tool {} has a bad or duplicate argument {:?}", self.name, a.name)));
            }
        }
        Ok(())
    }

    pub fn arg(&self, name: &str) -> Option<&ArgSpec> {
        self.args.iter().find(|a| a.name == name)
    }

    /// Checks `args` against the schema without running anything.
    pub fn check_args(&self, args: &Map<String, Value>) -> std::result::Result<(), ToolFailure> {
        for name in args.keys() {
            if self.arg(name).is_none() {
                return Err(ToolFailure::bad_args(format!("{}: unexpected argument {name:?}", self.name)));
            }
        }
        for spec in &self.args {
            match args.get(&spec.name) {
                None | Some(Value::Null) if spec.required => {
                    return Err(ToolFailure::bad_args(format!(
                        "{}: missing required argument {:?}",
                        self.name, spec.name
                    )))
                }
                None | Some(Value::Null) => {}
                Some(v) => check_value(spec, v)
                    .map_err(|m| ToolFailure::bad_args(format!("{}: argument {:?} {m}", self.name, spec.name)))?,
            }
        }
        Ok(())
    }
}

fn check_value(spec: &ArgSpec, v: &Value) -> std::result::Result<(), String> {
    let numeric = match spec.kind {
        ArgKind::Text | ArgKind::Identifier => {
            let s = v.as_str().ok_or("must be text")?;
            if spec.kind == ArgKind::Identifier && s.trim().is_empty() {
                return Err("must be a non-empty identifier".into());
            }
            if spec.constraint == Constraint::NonEmpty && s.trim().is_empty() {
                return Err("must be non-empty".into());
            }
            None
        }
        ArgKind::FrameRef => {
            let s = v.as_str().ok_or("must be a frame reference")?;
            FrameRef::parse_key(s).ok_or("must look like video_id@HH:MM:SS")?;
            None
        }
        ArgKind::Timestamp => Some(timestamp_value(v, false)?),
        ArgKind::Number => Some(v.as_f64().filter(|x| x.is_finite()).ok_or("must be a finite number")?),
    };
    if let Some(x) = numeric {
        match &spec.constraint {
            Constraint::Positive if x <= 0.0 => return Err(format!("must be positive (got {x})")),
            Constraint::Range { min, max } => {
                if min.is_some_and(|m| x < m) || max.is_some_and(|m| x > m) {
                    return Err(format!("{x} is outside [{min:?}, {max:?}]"));
                }
            }
            _ => {}
        }
    }
    Ok(())
}

/// Reads a timestamp argument as seconds.
pub fn timestamp_value(v: &Value, lenient: bool) -> std::result::Result<f64, String> {
    match v {
        Value::Number(n) => {
            n.as_f64().filter(|x| x.is_finite() && *x >= 0.0).ok_or_else(|| format!("{n} is not a valid time"))
        }
        Value::String(s) => {
            let parsed = if lenient {
                parse_timestamp_lenient(s)
            } else {
                parse_timestamp(s)
                    .or_else(|e| s.trim().parse::<f64>().ok().filter(|x| x.is_finite() && *x >= 0.0).ok_or(e))
            };
            parsed.map_err(|e| e.to_string())
        }
        other => Err(format!("{other} is not a time")),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureCategory {
    BadArgs,
    Environment,
    Upstream,
    NotFound,
}

impl fmt::Display for FailureCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FailureCategory::BadArgs => "bad_args",
            FailureCategory::Environment => "environment",
            FailureCategory::Upstream => "upstream",
            FailureCategory::NotFound => "not_found",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ToolFailure {
    pub category: FailureCategory,
    pub message: String,
    /// Package or module the environment lacks, when known.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub missing: Option<String>,
}

impl ToolFailure {
    fn of(category: FailureCategory, message: impl Into<String>) -> Self {
        ToolFailure { category, message: message.into(), missing: None }
    }

    pub fn bad_args(message: impl Into<String>) -> Self {
        Self::of(FailureCategory::BadArgs, message)
    }

    pub fn environment(message: impl Into<String>) -> Self {
        Self::of(FailureCategory::Environment, message)
    }

    pub fn upstream(message: impl Into<String>) -> Self {
        Self::of(FailureCategory::Upstream, message)
    }

    pub fn not_found(message: impl Into<String>) -> Self {
        Self::of(FailureCategory::NotFound, message)
    }
}

impl fmt::Display for ToolFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.category, self.message)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToolCall {
    #[serde(rename = "name", alias = "tool_name")]
    pub tool_name: String,
    #[serde(default)]
    pub args: Map<String, Value>,
}

impl ToolCall {
    pub fn new(tool_name: &str, args: Value) -> Self {
        ToolCall {
            tool_name: tool_name.to_string(),
            args: match args {
                Value::Object(m) => m,
                _ => Map::new(),
            },
        }
    }
}

/// What a handler produces on success.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ToolOutput {
    pub content: String,
    pub artifacts: Vec<Artifact>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToolResult {
    pub ok: bool,
    pub content: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub artifacts: Vec<Artifact>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure: Option<ToolFailure>,
}

impl ToolResult {
    pub fn success(out: ToolOutput) -> Self {
        ToolResult { ok: true, content: out.content, artifacts: out.artifacts, failure: None }
    }

    pub fn failed(failure: ToolFailure) -> Self {
        ToolResult { ok: false, content: String::new(), artifacts: Vec::new(), failure: Some(failure) }
    }
}

pub trait ToolHandler: Send + Sync {
    fn spec(&self) -> ToolSpec;

    fn call(&self, args: &Map<String, Value>) -> std::result::Result<ToolOutput, ToolFailure>;

    /// Valid range for timestamp arguments given the other arguments (for
    /// example a video's duration). The rescuer clamps into it.
    fn time_bounds(&self, _args: &Map<String, Value>) -> Option<(f64, f64)> {
        None
    }
}

#[derive(Default, Clone)]
pub struct ToolRegistry {
    tools: Vec<(ToolSpec, Arc<dyn ToolHandler>)>,
    index: HashMap<String, usize>,
}

impl ToolRegistry {
    pub fn new() -> Self {
        ToolRegistry::default()
    }

    pub fn register(&mut self, handler: Arc<dyn ToolHandler>) -> Result<()> {
        self.register_as(handler.spec(), handler)
    }

    pub fn register_as(&mut self, spec: ToolSpec, handler: Arc<dyn ToolHandler>) -> Result<()> {
        spec.validate()?;
        if self.index.contains_key(&spec.name) {
            return Err(Error::invalid(format!("tool {:?} is already registered", spec.name)));
        }
        self.index.insert(spec.name.clone(), self.tools.len());
        self.tools.push((spec, handler));
        Ok(())
    }

    /// Specs in registration order.
    pub fn catalog(&self) -> Vec<ToolSpec> {
        self.tools.iter().map(|(s, _)| s.clone()).collect()
    }

    pub fn catalog_document(&self) -> String {
        serde_json::to_string_pretty(&self.catalog()).expect("specs serialize")
    }

    pub fn get(&self, name: &str) -> Option<(&ToolSpec, &Arc<dyn ToolHandler>)> {
        self.index.get(name).map(|&i| (&self.tools[i].0, &self.tools[i].1))
    }

    pub fn len(&self) -> usize {
        self.tools.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tools.is_empty()
    }

    pub fn invoke(&self, call: &ToolCall) -> ToolResult {
        let Some((spec, handler)) = self.get(&call.tool_name) else {
            return ToolResult::failed(ToolFailure::not_found(format!("no tool named {:?}", call.tool_name)));
        };
        if let Err(f) = spec.check_args(&call.args) {
            return ToolResult::failed(f);
        }
        match catch_unwind(AssertUnwindSafe(|| handler.call(&call.args))) {
            Ok(Ok(out)) => ToolResult::success(out),
            Ok(Err(f)) => ToolResult::failed(f),
            Err(panic) => {
                let msg = panic
                    .downcast_ref::<&str>()
                    .map(|s| s.to_string())
                    .or_else(|| panic.downcast_ref::<String>().cloned())
                    .unwrap_or_else(|| "unknown panic".into());
                ToolResult::failed(ToolFailure::environment(format!("{} panicked: {msg}", call.tool_name)))
            }
        }
    }
}
