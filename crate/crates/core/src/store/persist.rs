//! On-disk layout: `entries.log` holds one JSON record per upsert (the
//! embedding as a plain number list), `meta` holds dimension and counts.
//! Replaying the log in order rebuilds the store; compaction rewrites it
//! with one record per live entry.

use std::collections::BTreeMap;
use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::KnowledgeEntry;
use crate::error::{Error, Result};

const LOG: &str = "entries.log";
const META: &str = "meta";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoreMeta {
    pub dimension: usize,
    pub count: usize,
    pub log_records: usize,
    #[serde(default)]
    pub per_video: BTreeMap<String, usize>,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
enum Record {
    Upsert { entry: KnowledgeEntry },
}

fn line(entry: &KnowledgeEntry) -> Result<String> {
    Ok(serde_json::to_string(&Record::Upsert { entry: entry.clone() })?)
}

pub(super) struct Loaded {
    pub dim: Option<usize>,
    pub entries: Vec<KnowledgeEntry>,
    /// A partial final record was found and skipped.
    pub torn: bool,
}

/// Reads the recorded dimension (if a store exists) and replays the log.
pub(super) fn load(dir: &Path) -> Result<Loaded> {
    fs::create_dir_all(dir)?;
    let meta_path = dir.join(META);
    let dim = if meta_path.exists() {
        let meta: StoreMeta = serde_json::from_str(&fs::read_to_string(&meta_path)?)?;
        Some(meta.dimension)
    } else {
        None
    };
    let log_path = dir.join(LOG);
    if !log_path.exists() {
        return Ok(Loaded { dim, entries: Vec::new(), torn: false });
    }
    let text = fs::read_to_string(&log_path)?;
    let lines: Vec<&str> = text.lines().filter(|l| !l.trim().is_empty()).collect();
    let mut entries = Vec::with_capacity(lines.len());
    let mut torn = false;
    for (i, l) in lines.iter().enumerate() {
        match serde_json::from_str::<Record>(l) {
            Ok(Record::Upsert { entry }) => entries.push(entry),
            Err(e) if i + 1 == lines.len() && !text.ends_with('\n') => {
                tracing::warn!(error = %e, "skipping torn final record in {}", log_path.display());
                torn = true;
            }
            Err(e) => return Err(Error::invalid(format!("{} line {}: {e}", log_path.display(), i + 1))),
        }
    }
    Ok(Loaded { dim, entries, torn })
}

pub(super) fn append(dir: &Path, entry: &KnowledgeEntry) -> Result<()> {
    let mut f = OpenOptions::new().create(true).append(true).open(dir.join(LOG))?;
    writeln!(f, "{}", line(entry)?)?;
    Ok(())
}

pub(super) fn rewrite(dir: &Path, entries: &[KnowledgeEntry]) -> Result<()> {
    let tmp = dir.join(format!("{LOG}.tmp"));
    {
        let mut f = fs::File::create(&tmp)?;
        for e in entries {
            writeln!(f, "{}", line(e)?)?;
        }
        f.sync_all()?;
    }
    fs::rename(&tmp, dir.join(LOG))?;
    Ok(())
}

pub(super) fn write_meta(dir: &Path, meta: &StoreMeta) -> Result<()> {
    let tmp = dir.join(format!("{META}.tmp"));
    fs::write(&tmp, serde_json::to_string_pretty(meta)?)?;
    fs::rename(&tmp, dir.join(META))?;
    Ok(())
}
