//! Execution traces. One document per query: the retrieval step, every
//! engine event in order, the final task tree and the answer. Nothing in it
//! depends on wall-clock time, so runs against deterministic providers
//! serialize byte-identically.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::Result;
use crate::store::HitSource;
use crate::task_tree::{NodeId, NodeRecord};
use crate::timecode::Span;
use crate::toolbox::{FailureCategory, ToolFailure};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum TraceEvent {
    Conquered {
        node: NodeId,
        depth: u32,
        verdict: String,
        detail: String,
    },
    Divided {
        node: NodeId,
        success: bool,
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        tasks: Vec<String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        reason: Option<String>,
    },
    DepthExceeded {
        node: NodeId,
        rejected: Vec<NodeId>,
    },
    ToolInvoked {
        node: NodeId,
        tool: String,
        args: Value,
        ok: bool,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        content: Option<String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        failure: Option<ToolFailure>,
    },
    Rescued {
        node: NodeId,
        attempt: u32,
        category: FailureCategory,
        repaired: bool,
        note: String,
    },
    Synthesized {
        answer: String,
        leaves: usize,
        failed_leaves: usize,
        /// No model call was made (nothing succeeded to synthesize from).
        passthrough: bool,
    },
}

impl TraceEvent {
    pub fn name(&self) -> &'static str {
        match self {
            TraceEvent::Conquered { .. } => "conquered",
            TraceEvent::Divided { .. } => "divided",
            TraceEvent::DepthExceeded { .. } => "depth_exceeded",
            TraceEvent::ToolInvoked { .. } => "tool_invoked",
            TraceEvent::Rescued { .. } => "rescued",
            TraceEvent::Synthesized { .. } => "synthesized",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievedRef {
    pub entry_id: String,
    pub score: f64,
    pub source: HitSource,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceDocument {
    pub query: String,
    #[serde(default)]
    pub video_id: Option<String>,
    #[serde(default)]
    pub filter: Option<Span>,
    pub retrieved: Vec<RetrievedRef>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notices: Vec<String>,
    pub events: Vec<TraceEvent>,
    pub tree: Vec<NodeRecord>,
    pub answer: String,
    pub unanswered: bool,
}

impl TraceDocument {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("traces serialize")
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json() + "\n")?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
    }

    pub fn count(&self, name: &str) -> usize {
        self.events.iter().filter(|e| e.name() == name).count()
    }

    pub fn tool_calls<'a>(&'a self, tool: &'a str) -> impl Iterator<Item = &'a TraceEvent> + 'a {
        self.events.iter().filter(move |e| matches!(e, TraceEvent::ToolInvoked { tool: t, .. } if t == tool))
    }
}
