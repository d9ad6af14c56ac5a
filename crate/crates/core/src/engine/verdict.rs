use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::{Error, Result};
use crate::providers::strip_code_fence;
use crate::toolbox::ToolCall;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParseMode {
    /// Only a JSON object with a valid `type` field.
    #[default]
    Strict,
    /// Also accepts the verdict phrases inside prose; the earliest wins.
    Lenient,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ConquerorVerdict {
    TooComplex { reason: String },
    RequiresTool { tool: ToolCall },
    DirectAnswer { answer: String },
}

impl ConquerorVerdict {
    pub fn kind(&self) -> &'static str {
        match self {
            ConquerorVerdict::TooComplex { .. } => "too_complex",
            ConquerorVerdict::RequiresTool { .. } => "requires_tool",
            ConquerorVerdict::DirectAnswer { .. } => "direct_answer",
        }
    }
}

fn text_of(v: Option<&Value>) -> Option<String> {
    let s = match v? {
        Value::String(s) => s.trim().to_string(),
        Value::Null => return None,
        other => other.to_string(),
    };
    (!s.is_empty()).then_some(s)
}

fn tool_of(obj: &Map<String, Value>) -> Option<ToolCall> {
    let tool = obj.get("tool")?;
    let mut call: ToolCall = match tool {
        Value::Object(_) => serde_json::from_value(tool.clone()).ok()?,
        Value::String(name) => ToolCall::new(name, obj.get("args").cloned().unwrap_or(Value::Null)),
        _ => return None,
    };
    if call.tool_name.trim().is_empty() {
        return None;
    }
    if call.args.is_empty() {
        if let Some(Value::Object(args)) = obj.get("args") {
            call.args = args.clone();
        }
    }
    Some(call)
}

fn normalize_kind(s: &str) -> Option<&'static str> {
    match s.trim().to_lowercase().replace([' ', '-'], "_").as_str() {
        "too_complex" => Some("too_complex"),
        "requires_tool" => Some("requires_tool"),
        "direct_answer" => Some("direct_answer"),
        _ => None,
    }
}

fn from_object(obj: &Map<String, Value>) -> std::result::Result<ConquerorVerdict, String> {
    let kind = obj
        .get("type")
        .and_then(Value::as_str)
        .and_then(normalize_kind)
        .ok_or_else(|| format!("unknown verdict type {}", obj.get("type").unwrap_or(&Value::Null)))?;
    match kind {
        "too_complex" => text_of(obj.get("reason"))
            .map(|reason| ConquerorVerdict::TooComplex { reason })
            .ok_or_else(|| "too_complex verdict without a reason".to_string()),
        "requires_tool" => tool_of(obj)
            .map(|tool| ConquerorVerdict::RequiresTool { tool })
            .ok_or_else(|| "requires_tool verdict without a usable tool call".to_string()),
        _ => text_of(obj.get("answer"))
            .map(|answer| ConquerorVerdict::DirectAnswer { answer })
            .ok_or_else(|| "direct_answer verdict without an answer".to_string()),
    }
}

/// The first balanced `{...}` block in `text` that parses as a JSON object.
fn embedded_object(text: &str) -> Option<Map<String, Value>> {
    for (start, _) in text.match_indices('{') {
        let mut stream = serde_json::Deserializer::from_str(&text[start..]).into_iter::<Value>();
        if let Some(Ok(Value::Object(obj))) = stream.next() {
            return Some(obj);
        }
    }
    None
}

const PHRASES: &[(&str, &str)] = &[
    ("too complex", "too_complex"),
    ("too_complex", "too_complex"),
    ("requires tool", "requires_tool"),
    ("requires_tool", "requires_tool"),
    ("requires a tool", "requires_tool"),
    ("direct answer", "direct_answer"),
    ("direct_answer", "direct_answer"),
];

fn from_prose(raw: &str) -> std::result::Result<ConquerorVerdict, String> {
    let lower = raw.to_lowercase();
    let (pos, phrase, kind) = PHRASES
        .iter()
        .filter_map(|(p, k)| lower.find(p).map(|i| (i, *p, *k)))
        .min_by_key(|(i, _, _)| *i)
        .ok_or_else(|| "no verdict phrase found".to_string())?;
    let after = raw[pos + phrase.len()..]
        .trim_start_matches(|c: char| c == '"' || c == ':' || c == '.' || c == ',' || c.is_whitespace())
        .trim();
    match kind {
        "too_complex" => Ok(ConquerorVerdict::TooComplex {
            reason: if after.is_empty() { raw.trim().to_string() } else { after.to_string() },
        }),
        "requires_tool" => embedded_object(raw)
            .and_then(|obj| tool_of(&obj).or_else(|| serde_json::from_value::<ToolCall>(Value::Object(obj)).ok()))
            .map(|tool| ConquerorVerdict::RequiresTool { tool })
            .ok_or_else(|| "requires tool, but no tool call could be read".to_string()),
        _ if after.is_empty() => Err("direct answer without answer text".to_string()),
        _ => Ok(ConquerorVerdict::DirectAnswer { answer: after.to_string() }),
    }
}

pub fn parse_verdict(raw: &str, mode: ParseMode) -> Result<ConquerorVerdict> {
    let strict = serde_json::from_str::<Value>(strip_code_fence(raw)).map_err(|e| format!("not JSON: {e}")).and_then(
        |v| match v {
            Value::Object(obj) => from_object(&obj),
            _ => Err("not a JSON object".to_string()),
        },
    );
    match (strict, mode) {
        (Ok(v), _) => Ok(v),
        (Err(e), ParseMode::Strict) => Err(Error::VerdictParse(e)),
        (Err(strict_err), ParseMode::Lenient) => {
            if let Some(v) = embedded_object(raw).and_then(|obj| from_object(&obj).ok()) {
                return Ok(v);
            }
            from_prose(raw).map_err(|e| Error::VerdictParse(format!("{strict_err}; {e}")))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DividePlan {
    pub success: bool,
    #[serde(default)]
    pub tasks: Vec<String>,
    #[serde(default)]
    pub reason: String,
}

pub const DEGENERATE_SPLIT: &str = "degenerate split";

impl DividePlan {
    pub fn failure(reason: impl Into<String>) -> Self {
        DividePlan { success: false, tasks: Vec::new(), reason: reason.into() }
    }

    /// Enforces the plan invariants: a success has at least two non-empty
    /// tasks, a failure carries a reason.
    fn normalized(mut self) -> Self {
        self.tasks.retain(|t| !t.trim().is_empty());
        if self.success {
            if self.tasks.len() < 2 {
                return DividePlan::failure(DEGENERATE_SPLIT);
            }
            self.reason.clear();
            self
        } else {
            let reason = if self.reason.trim().is_empty() {
                "the divider gave no reason".to_string()
            } else {
                self.reason.trim().to_string()
            };
            DividePlan::failure(reason)
        }
    }
}

fn list_items(raw: &str) -> Vec<String> {
    raw.lines()
        .filter_map(|l| {
            let l = l.trim();
            let rest = l.strip_prefix("- ").or_else(|| l.strip_prefix("* ")).or_else(|| {
                let digits = l.find(|c: char| !c.is_ascii_digit())?;
                (digits > 0).then(|| l[digits..].strip_prefix(". ").or_else(|| l[digits..].strip_prefix(") ")))?
            })?;
            let rest = rest.trim();
            (!rest.is_empty()).then(|| rest.to_string())
        })
        .collect()
}

pub fn parse_plan(raw: &str, mode: ParseMode) -> Result<DividePlan> {
    let parsed = serde_json::from_str::<Value>(strip_code_fence(raw))
        .ok()
        .or_else(|| (mode == ParseMode::Lenient).then(|| embedded_object(raw).map(Value::Object)).flatten())
        .and_then(|v| serde_json::from_value::<DividePlan>(v).ok());
    match (parsed, mode) {
        (Some(plan), _) => Ok(plan.normalized()),
        (None, ParseMode::Strict) => Err(Error::VerdictParse(format!("unreadable divide plan: {raw}"))),
        (None, ParseMode::Lenient) => {
            let tasks = list_items(raw);
            Ok(DividePlan { success: true, tasks, reason: String::new() }.normalized())
        }
    }
}
