use std::fs;
use std::path::{Component, Path, PathBuf};

use serde_json::{Map, Value};

use super::{ArgKind, ArgSpec, Constraint, ToolFailure, ToolHandler, ToolOutput, ToolSpec};
use crate::task_tree::Artifact;

const PREVIEW_CHARS: usize = 2000;

/// Reads text files under one root directory (normally the directory the
/// ingest manifests live in) and reports a short summary plus the start of
/// the content.
pub struct FileTool {
    root: PathBuf,
}

impl FileTool {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        FileTool { root: root.into() }
    }

    fn resolve(&self, rel: &str) -> Result<PathBuf, ToolFailure> {
        let p = Path::new(rel);
        let escapes =
            p.is_absolute() || p.components().any(|c| matches!(c, Component::ParentDir | Component::Prefix(_)));
        if escapes {
            return Err(ToolFailure::bad_args(format!("{rel:?} is outside the readable directory")));
        }
        Ok(self.root.join(p))
    }
}

impl ToolHandler for FileTool {
    fn spec(&self) -> ToolSpec {
        ToolSpec {
            name: "file_reader".into(),
            description:
                "Reads a text file next to the video manifests and returns its size, line count and opening text."
                    .into(),
            args: vec![ArgSpec::new(
                "path",
                ArgKind::Text,
                true,
                Constraint::NonEmpty,
                "path relative to the manifest directory",
            )],
        }
    }

    fn call(&self, args: &Map<String, Value>) -> Result<ToolOutput, ToolFailure> {
        let rel = args["path"].as_str().unwrap_or_default();
        let path = self.resolve(rel)?;
        let bytes = fs::read(&path).map_err(|e| ToolFailure::bad_args(format!("cannot read {rel:?}: {e}")))?;
        let text = String::from_utf8(bytes).map_err(|_| ToolFailure::bad_args(format!("{rel:?} is not UTF-8 text")))?;
        let preview: String = text.chars().take(PREVIEW_CHARS).collect();
        let truncated = if preview.len() < text.len() { " (truncated)" } else { "" };
        Ok(ToolOutput {
            content: format!("{rel}: {} bytes, {} lines{truncated}\n{preview}", text.len(), text.lines().count()),
            artifacts: vec![Artifact { name: "file".into(), reference: path.to_string_lossy().into_owned() }],
        })
    }
}
