//! Recursive record of every task decomposition and result for one query.
//!
//! Nodes live in an arena indexed by [`NodeId`]; ids are assigned in
//! creation order. The tree is append-only: only status, result and failure
//! reason change after a node is created.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(pub u32);

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskStatus {
    Pending,
    Running,
    Success,
    Failed,
    TooDeep,
}

impl TaskStatus {
    pub fn is_terminal(self) -> bool {
        matches!(self, TaskStatus::Success | TaskStatus::Failed | TaskStatus::TooDeep)
    }

    fn can_move_to(self, next: TaskStatus) -> bool {
        use TaskStatus::*;
        matches!((self, next), (Pending, Running) | (Pending, TooDeep) | (Running, Success) | (Running, Failed))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResultKind {
    Answer,
    ToolOutput,
}

/// A named attachment such as an extracted frame reference.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Artifact {
    pub name: String,
    pub reference: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskResult {
    pub kind: ResultKind,
    pub content: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub artifacts: Vec<Artifact>,
}

impl TaskResult {
    pub fn answer(content: impl Into<String>) -> Result<Self> {
        let content = content.into();
        if content.trim().is_empty() {
            return Err(Error::invalid("answer content must be non-empty"));
        }
        Ok(TaskResult { kind: ResultKind::Answer, content, artifacts: Vec::new() })
    }

    pub fn tool_output(content: impl Into<String>, artifacts: Vec<Artifact>) -> Self {
        TaskResult { kind: ResultKind::ToolOutput, content: content.into(), artifacts }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TaskNode {
    pub id: NodeId,
    pub parent: Option<NodeId>,
    pub description: String,
    pub status: TaskStatus,
    pub depth: u32,
    pub children: Vec<NodeId>,
    pub result: Option<TaskResult>,
    pub failure_reason: Option<String>,
}

impl TaskNode {
    pub fn is_leaf(&self) -> bool {
        self.children.is_empty()
    }
}

/// Flat serialized form of one node, used for traces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeRecord {
    pub id: NodeId,
    pub parent_id: Option<NodeId>,
    pub depth: u32,
    pub description: String,
    pub status: TaskStatus,
    pub result: Option<TaskResult>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure_reason: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TaskTree {
    nodes: Vec<TaskNode>,
}

impl TaskTree {
    /// Creates a tree whose root holds `user_task`.
    pub fn init(user_task: &str) -> Result<Self> {
        if user_task.trim().is_empty() {
            return Err(Error::invalid("task text must be non-empty"));
        }
        Ok(TaskTree {
            nodes: vec![TaskNode {
                id: NodeId(0),
                parent: None,
                description: user_task.to_string(),
                status: TaskStatus::Pending,
                depth: 0,
                children: Vec::new(),
                result: None,
                failure_reason: None,
            }],
        })
    }

    pub fn root(&self) -> NodeId {
        NodeId(0)
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn node(&self, id: NodeId) -> Result<&TaskNode> {
        self.nodes.get(id.0 as usize).ok_or_else(|| Error::invalid(format!("no node {id} in tree")))
    }

    fn node_mut(&mut self, id: NodeId) -> Result<&mut TaskNode> {
        self.nodes.get_mut(id.0 as usize).ok_or_else(|| Error::invalid(format!("no node {id} in tree")))
    }

    /// Appends one pending child per description, in order.
    pub fn add_subtasks<S: AsRef<str>>(&mut self, parent: NodeId, descriptions: &[S]) -> Result<Vec<NodeId>> {
        if descriptions.is_empty() {
            return Err(Error::invalid("subtask list must be non-empty"));
        }
        if descriptions.iter().any(|d| d.as_ref().trim().is_empty()) {
            return Err(Error::invalid("subtask descriptions must be non-empty"));
        }
        let depth = self.node(parent)?.depth + 1;
        let mut ids = Vec::with_capacity(descriptions.len());
        for description in descriptions {
            let id = NodeId(
                u32::try_from(self.nodes.len())
                    .map_err(|_| Error::Internal("task tree exceeded u32 node ids".to_string()))?,
            );
            if self.nodes.iter().any(|n| n.id == id) {
                return Err(Error::Internal(format!("duplicate child id {id}")));
            }
            self.nodes.push(TaskNode {
                id,
                parent: Some(parent),
                description: description.as_ref().to_string(),
                status: TaskStatus::Pending,
                depth,
                children: Vec::new(),
                result: None,
                failure_reason: None,
            });
            ids.push(id);
        }
        self.node_mut(parent)?.children.extend(ids.iter().copied());
        Ok(ids)
    }

    fn transition(&mut self, id: NodeId, next: TaskStatus) -> Result<&mut TaskNode> {
        let node = self.node_mut(id)?;
        if !node.status.can_move_to(next) {
            return Err(Error::StateTransition { node: id, from: node.status, to: next });
        }
        node.status = next;
        Ok(node)
    }

    pub fn start(&mut self, id: NodeId) -> Result<()> {
        self.transition(id, TaskStatus::Running).map(|_| ())
    }

    /// Stores `result` on a running node and marks it successful.
    pub fn update_result(&mut self, id: NodeId, result: TaskResult) -> Result<&TaskNode> {
        if result.kind == ResultKind::Answer && result.content.trim().is_empty() {
            return Err(Error::invalid("answer content must be non-empty"));
        }
        let node = self.transition(id, TaskStatus::Success)?;
        node.result = Some(result);
        Ok(node)
    }

    pub fn fail(&mut self, id: NodeId, reason: impl Into<String>) -> Result<()> {
        let node = self.transition(id, TaskStatus::Failed)?;
        node.failure_reason = Some(reason.into());
        Ok(())
    }

    /// Rejects a pending node that sits beyond the depth limit.
    pub fn mark_too_deep(&mut self, id: NodeId) -> Result<()> {
        if !self.node(id)?.children.is_empty() {
            return Err(Error::Internal(format!("{id} has children and cannot be too deep")));
        }
        let node = self.transition(id, TaskStatus::TooDeep)?;
        node.failure_reason = Some(crate::engine::DEPTH_EXCEEDED.to_string());
        Ok(())
    }

    /// Number of ancestors, counted by walking parent links.
    pub fn depth_of(&self, id: NodeId) -> Result<u32> {
        let mut depth = 0;
        let mut cursor = self.node(id)?.parent;
        while let Some(parent) = cursor {
            depth += 1;
            cursor = self.node(parent)?.parent;
        }
        Ok(depth)
    }

    /// Pre-order walk starting at the root.
    pub fn preorder(&self) -> Vec<NodeId> {
        let mut out = Vec::with_capacity(self.nodes.len());
        let mut stack = vec![self.root()];
        while let Some(id) = stack.pop() {
            out.push(id);
            let node = &self.nodes[id.0 as usize];
            stack.extend(node.children.iter().rev().copied());
        }
        out
    }

    /// Leaves in pre-order.
    pub fn leaves(&self) -> Vec<&TaskNode> {
        self.preorder().into_iter().map(|id| &self.nodes[id.0 as usize]).filter(|n| n.is_leaf()).collect()
    }

    pub fn nodes(&self) -> impl Iterator<Item = &TaskNode> {
        self.nodes.iter()
    }

    pub fn to_records(&self) -> Vec<NodeRecord> {
        self.preorder()
            .into_iter()
            .map(|id| {
                let n = &self.nodes[id.0 as usize];
                NodeRecord {
                    id: n.id,
                    parent_id: n.parent,
                    depth: n.depth,
                    description: n.description.clone(),
                    status: n.status,
                    result: n.result.clone(),
                    failure_reason: n.failure_reason.clone(),
                }
            })
            .collect()
    }

    /// Rebuilds a tree from records. Child order follows record order.
    pub fn from_records(records: &[NodeRecord]) -> Result<Self> {
        if records.is_empty() {
            return Err(Error::invalid("no node records"));
        }
        let mut nodes: Vec<Option<TaskNode>> = vec![None; records.len()];
        for r in records {
            let slot = nodes
                .get_mut(r.id.0 as usize)
                .ok_or_else(|| Error::invalid(format!("node id {} out of range", r.id)))?;
            if slot.is_some() {
                return Err(Error::invalid(format!("duplicate node id {}", r.id)));
            }
            *slot = Some(TaskNode {
                id: r.id,
                parent: r.parent_id,
                description: r.description.clone(),
                status: r.status,
                depth: r.depth,
                children: Vec::new(),
                result: r.result.clone(),
                failure_reason: r.failure_reason.clone(),
            });
        }
        let mut nodes: Vec<TaskNode> = nodes.into_iter().map(|n| n.expect("filled")).collect();
        for r in records {
            if let Some(parent) = r.parent_id {
                let p = nodes
                    .get_mut(parent.0 as usize)
                    .ok_or_else(|| Error::invalid(format!("missing parent {parent}")))?;
                p.children.push(r.id);
            }
        }
        if nodes[0].parent.is_some() {
            return Err(Error::invalid("node #0 must be the root"));
        }
        let tree = TaskTree { nodes };
        for n in &tree.nodes {
            if tree.depth_of(n.id)? != n.depth {
                return Err(Error::invalid(format!("depth mismatch at {}", n.id)));
            }
        }
        Ok(tree)
    }
}
