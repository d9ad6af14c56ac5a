//! The divide-and-conquer loop.
//!
//! A conqueror call judges each task: answer it directly, call a tool, or
//! declare it too complex. Too-complex tasks go to the divider, whose
//! subtasks are executed in order by recursion, each seeing the results of
//! the tasks before it. Failed tool calls pass through the rescuer before
//! the task is given up. Finally the leaf results are synthesized into one
//! answer.

mod rescue;
mod verdict;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::prompts;
use crate::providers::context::{AgentContext, AnswerContext, Doc, FailureNote, HitView, PriorResult, PromptContext};
use crate::providers::{ChatProvider, ChatRequest, Message, ProviderError, ResponseContract};
use crate::query::RetrievalContext;
use crate::task_tree::{NodeId, ResultKind, TaskResult, TaskStatus, TaskTree};
use crate::toolbox::{ToolCall, ToolRegistry};
use crate::trace::TraceEvent;

pub use rescue::{RepairOutcome, Rescuer};
pub use verdict::{parse_plan, parse_verdict, ConquerorVerdict, DividePlan, ParseMode, DEGENERATE_SPLIT};

pub const DEPTH_EXCEEDED: &str = "Task tree depth exceeded";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EngineConfig {
    /// Deepest level a task may sit at; the root is level 0.
    pub max_depth: u32,
    pub max_rescue_attempts: u32,
    #[serde(default)]
    pub verdict_parser: ParseMode,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig { max_depth: 4, max_rescue_attempts: 3, verdict_parser: ParseMode::Strict }
    }
}

impl EngineConfig {
    /// `max_depth` 0 is allowed: it forbids any division.
    pub fn validate(&self) -> Result<()> {
        if self.max_rescue_attempts == 0 {
            return Err(Error::invalid("max_rescue_attempts must be at least 1"));
        }
        Ok(())
    }
}

/// What one `dnc` call returns.
#[derive(Debug, Clone, PartialEq)]
pub enum DncOutcome {
    Done(TaskResult),
    /// The literal depth-limit message, a divider's reason, or the reason a
    /// tool call was given up.
    Unresolved(String),
}

impl DncOutcome {
    pub fn text(&self) -> &str {
        match self {
            DncOutcome::Done(r) => &r.content,
            DncOutcome::Unresolved(s) => s,
        }
    }
}

pub struct Execution {
    pub tree: TaskTree,
    pub events: Vec<TraceEvent>,
    pub outcome: DncOutcome,
    /// Set when a provider error stopped the loop.
    pub error: Option<String>,
}

pub struct Engine<'a> {
    pub agent: &'a dyn ChatProvider,
    pub tools: &'a ToolRegistry,
    pub rescuer: &'a Rescuer,
    pub config: EngineConfig,
}

struct Run<'e, 'c> {
    engine: &'e Engine<'e>,
    ctx: &'c RetrievalContext,
    hits: Vec<HitView>,
    tree: TaskTree,
    events: Vec<TraceEvent>,
}

fn prior_entry(tree: &TaskTree, id: NodeId) -> Option<PriorResult> {
    let n = tree.node(id).ok()?;
    let content = match (&n.result, &n.failure_reason) {
        (Some(r), _) => r.content.clone(),
        (None, Some(f)) => f.clone(),
        (None, None) => return None,
    };
    let status = match n.status {
        TaskStatus::Success => "success",
        TaskStatus::Failed => "failed",
        TaskStatus::TooDeep => "too_deep",
        _ => return None,
    };
    Some(PriorResult { task: n.description.clone(), status: status.into(), content })
}

impl<'e, 'c> Run<'e, 'c> {
    /// Finished earlier siblings of `id` and of each of its ancestors,
    /// outermost first.
    fn prior(&self, id: NodeId) -> (Vec<PriorResult>, Vec<PriorResult>) {
        let mut path = vec![id];
        while let Some(p) = self.tree.node(*path.last().expect("non-empty")).ok().and_then(|n| n.parent) {
            path.push(p);
        }
        path.reverse();
        let mut all = Vec::new();
        let mut own = Vec::new();
        for pair in path.windows(2) {
            let (parent, child) = (pair[0], pair[1]);
            let siblings = &self.tree.node(parent).expect("on path").children;
            let earlier: Vec<PriorResult> =
                siblings.iter().take_while(|&&s| s != child).filter_map(|&s| prior_entry(&self.tree, s)).collect();
            if child == id {
                own = earlier.clone();
            }
            all.extend(earlier);
        }
        (all, own)
    }

    fn agent_context(&self, id: NodeId, reason: Option<&str>) -> Result<AgentContext> {
        let node = self.tree.node(id)?;
        let parent_task = match node.parent {
            Some(p) => Some(self.tree.node(p)?.description.clone()),
            None => None,
        };
        let (prior, siblings) = self.prior(id);
        Ok(AgentContext {
            task: node.description.clone(),
            query: self.ctx.query.text.clone(),
            video_id: self.ctx.query.video_id.clone(),
            parent_task,
            reason: reason.map(str::to_string),
            filter: self.ctx.query.extracted_filter.as_ref().and_then(|f| f.window),
            hits: self.hits.clone(),
            siblings,
            prior,
            tools: self.ctx.tool_catalog.clone(),
        })
    }

    fn prompt(&self, template: &str, ac: &AgentContext) -> String {
        let parent = ac.parent_task.as_ref().map(|p| format!("This task is part of: {p}\n")).unwrap_or_default();
        prompts::fill(
            template,
            &[
                ("task", ac.task.clone()),
                ("query", ac.query.clone()),
                ("parent", parent),
                ("reason", ac.reason.clone().unwrap_or_default()),
                ("hits", prompts::hits_block(&ac.hits)),
                ("prior", prompts::prior_block(&ac.prior)),
                ("tools", prompts::tools_block(&ac.tools)),
            ],
        )
    }

    /// Sends a structured request. In lenient mode a contract violation
    /// still yields the raw text for the lenient parser.
    fn ask(&self, text: String, contract: ResponseContract, ctx: PromptContext) -> Result<String> {
        let req = ChatRequest::new(vec![Message::user(text)], contract).with_context(ctx.to_value());
        match self.engine.agent.chat(&req) {
            Ok(raw) => Ok(raw),
            Err(ProviderError::ContractViolation { raw, .. })
                if self.engine.config.verdict_parser == ParseMode::Lenient && !raw.trim().is_empty() =>
            {
                Ok(raw)
            }
            Err(ProviderError::ContractViolation { detail, .. }) => Err(Error::VerdictParse(detail)),
            Err(e) => Err(e.into()),
        }
    }

    fn conqueror(&self, id: NodeId) -> Result<ConquerorVerdict> {
        let ac = self.agent_context(id, None)?;
        let text = self.prompt(prompts::CONQUEROR, &ac);
        let raw = self.ask(text, ResponseContract::StructuredVerdict, PromptContext::Verdict(ac))?;
        parse_verdict(&raw, self.engine.config.verdict_parser)
    }

    fn divider(&self, id: NodeId, reason: &str) -> Result<DividePlan> {
        let ac = self.agent_context(id, Some(reason))?;
        let text = self.prompt(prompts::DIVIDER, &ac);
        let raw = self.ask(text, ResponseContract::StructuredPlan, PromptContext::Plan(ac))?;
        parse_plan(&raw, self.engine.config.verdict_parser)
    }

    fn call_tool(&mut self, id: NodeId, mut call: ToolCall) -> Result<DncOutcome> {
        let max = self.engine.config.max_rescue_attempts;
        let mut attempt = 0;
        loop {
            let result = self.engine.tools.invoke(&call);
            self.events.push(TraceEvent::ToolInvoked {
                node: id,
                tool: call.tool_name.clone(),
                args: serde_json::Value::Object(call.args.clone()),
                ok: result.ok,
                content: result.ok.then(|| result.content.clone()),
                failure: result.failure.clone(),
            });
            let failure = match result.failure {
                None => {
                    let out = TaskResult::tool_output(result.content, result.artifacts);
                    self.tree.update_result(id, out.clone())?;
                    return Ok(DncOutcome::Done(out));
                }
                Some(f) => f,
            };
            if attempt >= max {
                let reason = format!("{} failed after {attempt} repair attempts: {failure}", call.tool_name);
                self.tree.fail(id, reason.clone())?;
                return Ok(DncOutcome::Unresolved(reason));
            }
            attempt += 1;
            let repair = self.engine.rescuer.rescue(self.engine.tools, &call, &failure, attempt);
            self.events.push(TraceEvent::Rescued {
                node: id,
                attempt,
                category: failure.category,
                repaired: repair.repaired,
                note: repair.remedy_note.clone(),
            });
            match repair.retry_payload {
                Some(next) if repair.repaired => call = next,
                _ => {
                    let reason = format!("{}: {failure}; {}", call.tool_name, repair.remedy_note);
                    self.tree.fail(id, reason.clone())?;
                    return Ok(DncOutcome::Unresolved(reason));
                }
            }
        }
    }

    fn dnc(&mut self, id: NodeId) -> Result<DncOutcome> {
        self.tree.start(id)?;
        let verdict = match self.conqueror(id) {
            Ok(v) => v,
            Err(e) => {
                self.tree.fail(id, e.to_string())?;
                return Err(e);
            }
        };
        let depth = self.tree.node(id)?.depth;
        let detail = match &verdict {
            ConquerorVerdict::TooComplex { reason } => reason.clone(),
            ConquerorVerdict::RequiresTool { tool } => tool.tool_name.clone(),
            ConquerorVerdict::DirectAnswer { answer } => answer.clone(),
        };
        self.events.push(TraceEvent::Conquered { node: id, depth, verdict: verdict.kind().into(), detail });
        match verdict {
            ConquerorVerdict::DirectAnswer { answer } => {
                let result = TaskResult::answer(answer)?;
                self.tree.update_result(id, result.clone())?;
                Ok(DncOutcome::Done(result))
            }
            ConquerorVerdict::RequiresTool { tool } => self.call_tool(id, tool),
            ConquerorVerdict::TooComplex { reason } => {
                let plan = match self.divider(id, &reason) {
                    Ok(p) => p,
                    Err(e) => {
                        self.tree.fail(id, e.to_string())?;
                        return Err(e);
                    }
                };
                self.events.push(TraceEvent::Divided {
                    node: id,
                    success: plan.success,
                    tasks: plan.tasks.clone(),
                    reason: (!plan.success).then(|| plan.reason.clone()),
                });
                if !plan.success {
                    self.tree.fail(id, plan.reason.clone())?;
                    return Ok(DncOutcome::Unresolved(plan.reason));
                }
                let children = self.tree.add_subtasks(id, &plan.tasks)?;
                for (i, &child) in children.iter().enumerate() {
                    if self.tree.node(child)?.depth > self.engine.config.max_depth {
                        let rejected = children[i..].to_vec();
                        for &r in &rejected {
                            self.tree.mark_too_deep(r)?;
                        }
                        self.events.push(TraceEvent::DepthExceeded { node: id, rejected });
                        self.tree.fail(id, DEPTH_EXCEEDED)?;
                        return Ok(DncOutcome::Unresolved(DEPTH_EXCEEDED.to_string()));
                    }
                    self.dnc(child)?;
                }
                self.finish_divided(id, &children)
            }
        }
    }

    /// A divided task succeeds with its children's results joined, unless
    /// every child failed.
    fn finish_divided(&mut self, id: NodeId, children: &[NodeId]) -> Result<DncOutcome> {
        let mut parts = Vec::new();
        let mut kind = ResultKind::Answer;
        for &c in children {
            let n = self.tree.node(c)?;
            if let Some(r) = &n.result {
                parts.push(r.content.clone());
                if r.kind == ResultKind::ToolOutput {
                    kind = ResultKind::ToolOutput;
                }
            }
        }
        if parts.is_empty() {
            let reason = "every subtask failed".to_string();
            self.tree.fail(id, reason.clone())?;
            return Ok(DncOutcome::Unresolved(reason));
        }
        let result = TaskResult { kind, content: parts.join("\n"), artifacts: Vec::new() };
        self.tree.update_result(id, result.clone())?;
        Ok(DncOutcome::Done(result))
    }
}

impl<'a> Engine<'a> {
    pub fn new(
        agent: &'a dyn ChatProvider,
        tools: &'a ToolRegistry,
        rescuer: &'a Rescuer,
        config: EngineConfig,
    ) -> Self {
        Engine { agent, tools, rescuer, config }
    }

    /// Runs the loop on the query text as root task. Provider failures stop
    /// the loop; the partial tree is returned with the error recorded and
    /// every unfinished node failed.
    pub fn run(&self, ctx: &RetrievalContext) -> Result<Execution> {
        self.config.validate()?;
        let mut run = Run {
            engine: self,
            ctx,
            hits: ctx.hits.iter().map(HitView::of).collect(),
            tree: TaskTree::init(&ctx.query.text)?,
            events: Vec::new(),
        };
        let root = run.tree.root();
        let (outcome, error) = match run.dnc(root) {
            Ok(o) => (o, None),
            Err(e) => {
                let msg = e.to_string();
                let open: Vec<NodeId> =
                    run.tree.nodes().filter(|n| n.status == TaskStatus::Running).map(|n| n.id).collect();
                for id in open {
                    run.tree.fail(id, format!("aborted: {msg}"))?;
                }
                (DncOutcome::Unresolved(msg.clone()), Some(msg))
            }
        };
        Ok(Execution { tree: run.tree, events: run.events, outcome, error })
    }
}

/// Leaf results, in order, as synthesis documents; failed and rejected
/// leaves become failure notes.
pub fn synthesis_inputs(tree: &TaskTree) -> (Vec<Doc>, Vec<FailureNote>) {
    let mut docs = Vec::new();
    let mut failures = Vec::new();
    for leaf in tree.leaves() {
        match (&leaf.result, leaf.status) {
            (Some(r), TaskStatus::Success) => {
                docs.push(Doc { label: leaf.description.clone(), text: r.content.clone(), span: None })
            }
            _ => failures.push(FailureNote {
                task: leaf.description.clone(),
                reason: leaf.failure_reason.clone().unwrap_or_else(|| "not completed".into()),
            }),
        }
    }
    (docs, failures)
}

/// Writes the final answer from the tree's leaf results and the original
/// query.
pub fn conclusive_synthesis(tree: &TaskTree, query: &str, provider: &dyn ChatProvider) -> Result<String> {
    if tree.is_empty() {
        return Err(Error::invalid("cannot synthesize from an empty tree"));
    }
    let (docs, failures) = synthesis_inputs(tree);
    let text = prompts::fill(
        prompts::SYNTHESIS,
        &[
            ("question", query.to_string()),
            ("docs", prompts::docs_block(&docs)),
            ("failures", prompts::failures_block(&failures)),
        ],
    );
    let ctx = PromptContext::Synthesis(AnswerContext { question: query.to_string(), docs, failures });
    let req = ChatRequest::new(vec![Message::user(text)], ResponseContract::FreeText).with_context(ctx.to_value());
    Ok(provider.chat(&req)?.trim().to_string())
}
