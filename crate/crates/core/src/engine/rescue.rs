use std::sync::Arc;
use std::thread;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::timecode::format_hms;
use crate::toolbox::{timestamp_value, ArgKind, FailureCategory, Installer, ToolCall, ToolFailure, ToolRegistry};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepairOutcome {
    pub repaired: bool,
    pub remedy_note: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub retry_payload: Option<ToolCall>,
}

impl RepairOutcome {
    fn give_up(note: impl Into<String>) -> Self {
        RepairOutcome { repaired: false, remedy_note: note.into(), retry_payload: None }
    }

    fn retry(note: impl Into<String>, call: ToolCall) -> Self {
        RepairOutcome { repaired: true, remedy_note: note.into(), retry_payload: Some(call) }
    }
}

/// Repairs failed tool calls by failure category: bad arguments are
/// normalized, a missing package is installed, upstream failures are
/// retried after a backoff, and unknown tools are given up on.
pub struct Rescuer {
    installer: Option<Arc<dyn Installer>>,
    backoff: Duration,
}

impl Default for Rescuer {
    fn default() -> Self {
        Rescuer { installer: None, backoff: Duration::from_millis(250) }
    }
}

impl Rescuer {
    pub fn new(installer: Option<Arc<dyn Installer>>, backoff: Duration) -> Self {
        Rescuer { installer, backoff }
    }

    /// `attempt` counts from 1.
    pub fn rescue(&self, tools: &ToolRegistry, call: &ToolCall, failure: &ToolFailure, attempt: u32) -> RepairOutcome {
        match failure.category {
            FailureCategory::BadArgs => amend_args(tools, call),
            FailureCategory::Environment => match (&failure.missing, &self.installer) {
                (Some(pkg), Some(installer)) => match installer.install(pkg) {
                    Ok(note) => RepairOutcome::retry(note, call.clone()),
                    Err(e) => RepairOutcome::give_up(format!("could not install {pkg}: {e}")),
                },
                (Some(pkg), None) => RepairOutcome::give_up(format!("{pkg} is missing and no installer is configured")),
                (None, _) => RepairOutcome::give_up(format!("environment cannot be repaired: {}", failure.message)),
            },
            FailureCategory::Upstream => {
                let wait = self.backoff.saturating_mul(1 << (attempt.saturating_sub(1)).min(16));
                thread::sleep(wait);
                RepairOutcome::retry(format!("retrying after {} ms", wait.as_millis()), call.clone())
            }
            FailureCategory::NotFound => RepairOutcome::give_up(format!("giving up: {}", failure.message)),
        }
    }
}

/// Re-reads every timestamp argument leniently, clamps it into the tool's
/// time bounds and writes it back as `HH:MM:SS`. A `t0`/`t1` pair that ends
/// up reversed is swapped. Repaired only if something changed.
fn amend_args(tools: &ToolRegistry, call: &ToolCall) -> RepairOutcome {
    let Some((spec, handler)) = tools.get(&call.tool_name) else {
        return RepairOutcome::give_up(format!("no tool named {:?}", call.tool_name));
    };
    let bounds = handler.time_bounds(&call.args);
    let mut args = call.args.clone();
    let mut notes = Vec::new();
    for arg in spec.args.iter().filter(|a| a.kind == ArgKind::Timestamp) {
        let Some(v) = args.get(&arg.name) else { continue };
        let Ok(mut secs) = timestamp_value(v, true) else {
            continue;
        };
        if let Some((lo, hi)) = bounds {
            secs = secs.clamp(lo, hi);
        }
        let fixed = Value::String(format_hms(secs));
        if &fixed != v {
            notes.push(format!("{} {} -> {}", arg.name, v, fixed));
            args.insert(arg.name.clone(), fixed);
        }
    }
    if let (Some(a), Some(b)) = (args.get("t0").cloned(), args.get("t1").cloned()) {
        if let (Ok(x), Ok(y)) = (timestamp_value(&a, true), timestamp_value(&b, true)) {
            if x > y {
                notes.push("swapped t0 and t1".into());
                args.insert("t0".into(), b);
                args.insert("t1".into(), a);
            }
        }
    }
    if notes.is_empty() {
        return RepairOutcome::give_up("no argument could be amended");
    }
    RepairOutcome::retry(
        format!("amended arguments: {}", notes.join("; ")),
        ToolCall { tool_name: call.tool_name.clone(), args },
    )
}
