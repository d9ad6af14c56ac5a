//! Scripted chat mock.
//!
//! A script maps request digests to canned responses. It can also carry
//! ordered rules that match on the request's contract and structured
//! context; the first matching rule's response is rendered as a template
//! against that context. Requests that match nothing go to the fallback
//! provider, or fail with a missing-script error naming the digest.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::digest::request_digest;
use super::template::{render_str, render_value};
use super::{ChatProvider, ChatRequest, ProviderError, ResponseContract};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Condition {
    /// JSON pointer into the context, or `$messages` for the concatenated
    /// message texts.
    #[serde(default = "default_path")]
    pub path: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub equals: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub contains: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prefix: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub not_contains: Option<String>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub ignore_case: bool,
}

fn default_path() -> String {
    "/task".to_string()
}

impl Condition {
    pub fn task_equals(text: impl Into<String>) -> Self {
        Condition { equals: Some(text.into()), ..Condition::default_task() }
    }

    pub fn task_prefix(text: impl Into<String>) -> Self {
        Condition { prefix: Some(text.into()), ..Condition::default_task() }
    }

    pub fn task_contains(text: impl Into<String>) -> Self {
        Condition { contains: Some(text.into()), ..Condition::default_task() }
    }

    fn default_task() -> Self {
        Condition { path: default_path(), ..Condition::default() }
    }

    fn subject(&self, req: &ChatRequest) -> Option<String> {
        if self.path == "$messages" {
            let joined: Vec<&str> = req.messages.iter().map(|m| m.text.as_str()).collect();
            return Some(joined.join("\n"));
        }
        match req.context.as_ref()?.pointer(&self.path)? {
            Value::String(s) => Some(s.clone()),
            other => Some(other.to_string()),
        }
    }

    fn holds(&self, req: &ChatRequest) -> bool {
        let Some(subject) = self.subject(req) else {
            return false;
        };
        let fold = |s: &str| {
            if self.ignore_case {
                s.to_lowercase()
            } else {
                s.to_string()
            }
        };
        let subject = fold(&subject);
        self.equals.as_deref().is_none_or(|e| subject == fold(e))
            && self.contains.as_deref().is_none_or(|c| subject.contains(&fold(c)))
            && self.prefix.as_deref().is_none_or(|p| subject.starts_with(&fold(p)))
            && self.not_contains.as_deref().is_none_or(|n| !subject.contains(&fold(n)))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rule {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub contract: Option<ResponseContract>,
    /// Matches the context's `kind` tag.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kind: Option<String>,
    #[serde(default)]
    pub when: Vec<Condition>,
    /// A template string, or a JSON value whose strings are templates.
    pub response: Value,
}

impl Rule {
    pub fn new(kind: &str, when: Vec<Condition>, response: Value) -> Self {
        Rule { name: None, contract: None, kind: Some(kind.to_string()), when, response }
    }

    fn matches(&self, req: &ChatRequest) -> bool {
        self.contract.is_none_or(|c| c == req.contract)
            && self.kind.as_deref().is_none_or(|k| req.context_kind() == Some(k))
            && self.when.iter().all(|c| c.holds(req))
    }

    fn render(&self, req: &ChatRequest) -> Result<String, String> {
        let ctx = req.context.clone().unwrap_or(Value::Null);
        match &self.response {
            Value::String(t) => render_str(t, &ctx),
            other => render_value(other, &ctx).map(|v| v.to_string()),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Script {
    #[serde(default)]
    pub responses: BTreeMap<String, String>,
    #[serde(default)]
    pub rules: Vec<Rule>,
}

impl Script {
    pub fn load(path: &Path) -> Result<Self, ProviderError> {
        let text = fs::read_to_string(path).map_err(|e| ProviderError::Fixture(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| ProviderError::Fixture(format!("{}: {e}", path.display())))
    }

    pub fn save(&self, path: &Path) -> std::io::Result<()> {
        fs::write(path, serde_json::to_string_pretty(self).expect("script serializes"))
    }

    pub fn respond(&mut self, req: &ChatRequest, text: impl Into<String>) -> &mut Self {
        self.responses.insert(request_digest(req), text.into());
        self
    }

    pub fn rule(&mut self, rule: Rule) -> &mut Self {
        self.rules.push(rule);
        self
    }
}

pub struct ScriptedChat {
    name: String,
    script: Script,
    fallback: Option<Arc<dyn ChatProvider>>,
}

impl ScriptedChat {
    pub fn new(name: impl Into<String>, script: Script) -> Self {
        ScriptedChat { name: name.into(), script, fallback: None }
    }

    pub fn with_fallback(mut self, fallback: Arc<dyn ChatProvider>) -> Self {
        self.fallback = Some(fallback);
        self
    }

    pub fn script(&self) -> &Script {
        &self.script
    }
}

impl ChatProvider for ScriptedChat {
    fn name(&self) -> &str {
        &self.name
    }

    fn complete(&self, req: &ChatRequest) -> Result<String, ProviderError> {
        let digest = request_digest(req);
        if let Some(text) = self.script.responses.get(&digest) {
            return Ok(text.clone());
        }
        if let Some(rule) = self.script.rules.iter().find(|r| r.matches(req)) {
            return rule.render(req).map_err(|e| {
                let name = rule.name.as_deref().unwrap_or("unnamed");
                ProviderError::Fixture(format!("rule {name}: {e}"))
            });
        }
        match &self.fallback {
            Some(fallback) => fallback.complete(req),
            None => Err(ProviderError::MissingScript { provider: self.name.clone(), digest }),
        }
    }
}
