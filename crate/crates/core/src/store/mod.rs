//! Knowledge store: caption embeddings for exact cosine search plus the
//! caption texts for keyword search, with segment start and end times as
//! filter fields.
//!
//! Searches are exhaustive. Readers and the single writer are serialized
//! through a reader-writer lock, so a search sees an upsert entirely or not
//! at all.

mod persist;

use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};
use std::sync::{RwLock, RwLockReadGuard, RwLockWriteGuard};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::providers::EmbeddingProvider;
use crate::text::{content_tokens, whitespace_tokens};
use crate::timecode::Span;

pub use persist::StoreMeta;

pub const DEFAULT_K: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnowledgeEntry {
    pub entry_id: String,
    pub video_id: String,
    pub start_ts: f64,
    pub end_ts: f64,
    pub caption_text: String,
    pub embedding: Vec<f32>,
}

impl KnowledgeEntry {
    /// Stable id for one segment of one video, so re-ingesting replaces.
    pub fn segment_id(video_id: &str, start_ts: f64, end_ts: f64) -> String {
        format!("{video_id}:{start_ts:.3}-{end_ts:.3}")
    }

    pub fn span(&self) -> Span {
        Span { lo: self.start_ts, hi: self.end_ts }
    }

    fn validate(&self, dim: usize) -> Result<()> {
        if self.entry_id.trim().is_empty() || self.video_id.trim().is_empty() {
            return Err(Error::invalid("entry_id and video_id must be non-empty"));
        }
        if !(self.start_ts.is_finite() && self.end_ts.is_finite() && self.start_ts < self.end_ts) {
            return Err(Error::invalid(format!(
                "entry {} needs start_ts < end_ts (got {}, {})",
                self.entry_id, self.start_ts, self.end_ts
            )));
        }
        if self.embedding.len() != dim {
            return Err(Error::invalid(format!(
                "entry {} has dimension {} but the store uses {dim}",
                self.entry_id,
                self.embedding.len()
            )));
        }
        let norm = self.embedding.iter().map(|&x| f64::from(x).powi(2)).sum::<f64>().sqrt();
        if !((norm - 1.0).abs() <= 1e-6) {
            return Err(Error::invalid(format!("entry {} embedding norm is {norm}, expected 1", self.entry_id)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TimeFilter {
    #[serde(default)]
    pub window: Option<Span>,
    #[serde(default)]
    pub video_id: Option<String>,
}

impl TimeFilter {
    pub fn none() -> Self {
        TimeFilter::default()
    }

    pub fn video(video_id: impl Into<String>) -> Self {
        TimeFilter { window: None, video_id: Some(video_id.into()) }
    }

    pub fn with_window(mut self, window: Span) -> Self {
        self.window = Some(window);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(w) = self.window {
            Span::new(w.lo, w.hi)?;
        }
        Ok(())
    }

    /// Positive-length intersection with the window. A degenerate window
    /// (a single instant) matches entries whose closed span holds it.
    pub fn admits(&self, entry: &KnowledgeEntry) -> bool {
        if self.video_id.as_deref().is_some_and(|v| v != entry.video_id) {
            return false;
        }
        match self.window {
            None => true,
            Some(w) if w.lo == w.hi => entry.start_ts <= w.lo && w.lo <= entry.end_ts,
            Some(w) => w.hi.min(entry.end_ts) - w.lo.max(entry.start_ts) > 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HitSource {
    Vector,
    Keyword,
    Both,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievalHit {
    pub entry: KnowledgeEntry,
    pub score: f64,
    pub source: HitSource,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SearchOutcome {
    pub hits: Vec<RetrievalHit>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Default)]
struct Inner {
    entries: Vec<KnowledgeEntry>,
    by_id: HashMap<String, usize>,
    by_span: HashMap<(String, u64, u64), usize>,
    log_records: usize,
}

impl Inner {
    fn span_key(e: &KnowledgeEntry) -> (String, u64, u64) {
        (e.video_id.clone(), e.start_ts.to_bits(), e.end_ts.to_bits())
    }

    fn conflict(&self, entry: &KnowledgeEntry) -> Result<Option<usize>> {
        let same_span = self.by_span.get(&Self::span_key(entry)).copied();
        if let Some(&i) = self.by_id.get(&entry.entry_id) {
            if Some(i) != same_span {
                return Err(Error::invalid(format!("entry id {} already names a different segment", entry.entry_id)));
            }
        }
        Ok(same_span)
    }

    fn put(&mut self, entry: KnowledgeEntry) -> Result<()> {
        match self.conflict(&entry)? {
            Some(i) => {
                self.by_id.remove(&self.entries[i].entry_id);
                self.by_id.insert(entry.entry_id.clone(), i);
                self.entries[i] = entry;
            }
            None => {
                self.by_id.insert(entry.entry_id.clone(), self.entries.len());
                self.by_span.insert(Self::span_key(&entry), self.entries.len());
                self.entries.push(entry);
            }
        }
        Ok(())
    }
}

fn rank(hits: &mut [RetrievalHit]) {
    hits.sort_by(|a, b| b.score.total_cmp(&a.score).then_with(|| a.entry.entry_id.cmp(&b.entry.entry_id)));
}

pub struct KnowledgeStore {
    dim: usize,
    dir: Option<PathBuf>,
    inner: RwLock<Inner>,
}

impl KnowledgeStore {
    pub fn in_memory(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("store dimension must be positive"));
        }
        Ok(KnowledgeStore { dim, dir: None, inner: RwLock::new(Inner::default()) })
    }

    /// Opens (or creates) an on-disk store. `dim` must match an existing
    /// store's dimension when given; a new store needs it.
    pub fn open(dir: &Path, dim: Option<usize>) -> Result<Self> {
        let loaded = persist::load(dir)?;
        let dim = match (loaded.dim, dim) {
            (Some(m), Some(d)) if m != d => {
                return Err(Error::invalid(format!("store at {} has dimension {m}, not {d}", dir.display())))
            }
            (Some(m), _) => m,
            (None, Some(d)) => d,
            (None, None) => {
                return Err(Error::invalid(format!("no store at {} and no dimension given", dir.display())))
            }
        };
        let store = KnowledgeStore { dim, dir: Some(dir.to_path_buf()), inner: RwLock::new(Inner::default()) };
        {
            let mut inner = store.write();
            inner.log_records = loaded.entries.len();
            for e in loaded.entries {
                e.validate(dim)?;
                inner.put(e)?;
            }
            if loaded.torn {
                persist::rewrite(dir, &inner.entries)?;
                inner.log_records = inner.entries.len();
            }
            store.write_meta(&inner)?;
        }
        Ok(store)
    }

    fn read(&self) -> RwLockReadGuard<'_, Inner> {
        self.inner.read().unwrap_or_else(|e| e.into_inner())
    }

    fn write(&self) -> RwLockWriteGuard<'_, Inner> {
        self.inner.write().unwrap_or_else(|e| e.into_inner())
    }

    pub fn dimension(&self) -> usize {
        self.dim
    }

    pub fn dir(&self) -> Option<&Path> {
        self.dir.as_deref()
    }

    pub fn len(&self) -> usize {
        self.read().entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn meta(&self) -> StoreMeta {
        self.meta_of(&self.read())
    }

    fn meta_of(&self, inner: &Inner) -> StoreMeta {
        let mut per_video = BTreeMap::new();
        for e in &inner.entries {
            *per_video.entry(e.video_id.clone()).or_insert(0) += 1;
        }
        StoreMeta { dimension: self.dim, count: inner.entries.len(), log_records: inner.log_records, per_video }
    }

    /// Callers hold the write guard so concurrent writers never share the
    /// temp file.
    fn write_meta(&self, inner: &Inner) -> Result<()> {
        match &self.dir {
            Some(dir) => persist::write_meta(dir, &self.meta_of(inner)),
            None => Ok(()),
        }
    }

    /// Inserts, or replaces the entry with the same video and span.
    pub fn upsert(&self, entry: KnowledgeEntry) -> Result<()> {
        entry.validate(self.dim)?;
        let mut inner = self.write();
        inner.conflict(&entry)?;
        if let Some(dir) = &self.dir {
            persist::append(dir, &entry)?;
            inner.log_records += 1;
        }
        inner.put(entry)?;
        if let Some(dir) = &self.dir {
            if inner.log_records > 2 * inner.entries.len() + 16 {
                persist::rewrite(dir, &inner.entries)?;
                inner.log_records = inner.entries.len();
            }
        }
        self.write_meta(&inner)
    }

    /// Rewrites the log so it holds exactly one record per live entry.
    pub fn compact(&self) -> Result<()> {
        let mut inner = self.write();
        if let Some(dir) = &self.dir {
            persist::rewrite(dir, &inner.entries)?;
            inner.log_records = inner.entries.len();
        }
        self.write_meta(&inner)
    }

    pub fn get(&self, entry_id: &str) -> Option<KnowledgeEntry> {
        let inner = self.read();
        inner.by_id.get(entry_id).map(|&i| inner.entries[i].clone())
    }

    /// Entries in insertion order, optionally for one video, sorted by start.
    pub fn entries(&self, video_id: Option<&str>) -> Vec<KnowledgeEntry> {
        let mut out: Vec<KnowledgeEntry> =
            self.read().entries.iter().filter(|e| video_id.is_none_or(|v| v == e.video_id)).cloned().collect();
        out.sort_by(|a, b| a.video_id.cmp(&b.video_id).then(a.start_ts.total_cmp(&b.start_ts)));
        out
    }

    /// Exact top-k by cosine similarity among admitted entries. Ties break
    /// by ascending entry id.
    pub fn vector_search(&self, query: &[f32], filter: &TimeFilter, k: usize) -> Result<Vec<RetrievalHit>> {
        if k == 0 {
            return Err(Error::invalid("k must be at least 1"));
        }
        if query.len() != self.dim {
            return Err(Error::invalid(format!("query has dimension {} but the store uses {}", query.len(), self.dim)));
        }
        filter.validate()?;
        let qnorm = query.iter().map(|&x| f64::from(x).powi(2)).sum::<f64>().sqrt();
        if !(qnorm > 0.0 && qnorm.is_finite()) {
            return Err(Error::invalid("query vector must be finite and non-zero"));
        }
        let inner = self.read();
        let mut hits: Vec<RetrievalHit> = inner
            .entries
            .iter()
            .filter(|e| filter.admits(e))
            .map(|e| {
                let dot: f64 = e.embedding.iter().zip(query).map(|(&a, &b)| f64::from(a) * f64::from(b)).sum();
                RetrievalHit { entry: e.clone(), score: dot / qnorm, source: HitSource::Vector }
            })
            .collect();
        rank(&mut hits);
        hits.truncate(k);
        Ok(hits)
    }

    /// Ranks admitted entries by total occurrences of the (case-folded,
    /// whitespace-split) terms in their caption text.
    pub fn keyword_search<S: AsRef<str>>(
        &self,
        terms: &[S],
        filter: &TimeFilter,
        k: usize,
    ) -> Result<Vec<RetrievalHit>> {
        if k == 0 {
            return Err(Error::invalid("k must be at least 1"));
        }
        filter.validate()?;
        let terms: Vec<String> = terms.iter().flat_map(|t| whitespace_tokens(t.as_ref())).collect();
        if terms.is_empty() {
            return Err(Error::invalid("keyword search needs at least one term"));
        }
        let inner = self.read();
        let mut hits = Vec::new();
        for e in inner.entries.iter().filter(|e| filter.admits(e)) {
            let tokens = whitespace_tokens(&e.caption_text);
            let count = terms.iter().map(|t| tokens.iter().filter(|x| *x == t).count()).sum::<usize>();
            if count > 0 {
                hits.push(RetrievalHit { entry: e.clone(), score: count as f64, source: HitSource::Keyword });
            }
        }
        rank(&mut hits);
        hits.truncate(k);
        Ok(hits)
    }

    /// Union of vector and keyword top-k. Each side's scores are divided by
    /// that side's best score, and an entry found by both gets the sum.
    /// Keyword terms are the query's content words. An embedder failure
    /// degrades to keyword-only results with a warning.
    pub fn hybrid_search(
        &self,
        query_text: &str,
        embedder: &dyn EmbeddingProvider,
        filter: &TimeFilter,
        k: usize,
    ) -> Result<SearchOutcome> {
        if query_text.trim().is_empty() {
            return Err(Error::invalid("query text must be non-empty"));
        }
        let mut warnings = Vec::new();
        let vector = match embedder.embed(query_text) {
            Ok(q) => self.vector_search(&q, filter, k)?,
            Err(e) => {
                warnings.push(format!("embedding failed, keyword results only: {e}"));
                Vec::new()
            }
        };
        let terms: Vec<String> = content_tokens(query_text).into_iter().collect();
        let keyword = if terms.is_empty() { Vec::new() } else { self.keyword_search(&terms, filter, k)? };
        Ok(SearchOutcome { hits: fuse(vector, keyword), warnings })
    }
}

/// Max-normalized score fusion over the union of two ranked lists.
pub fn fuse(vector: Vec<RetrievalHit>, keyword: Vec<RetrievalHit>) -> Vec<RetrievalHit> {
    fn scaled(hits: &[RetrievalHit]) -> Vec<f64> {
        let max = hits.iter().map(|h| h.score).fold(f64::NEG_INFINITY, f64::max);
        hits.iter().map(|h| if max > 0.0 { h.score.max(0.0) / max } else { 0.0 }).collect()
    }
    let (vs, ks) = (scaled(&vector), scaled(&keyword));
    let mut merged: BTreeMap<String, RetrievalHit> = BTreeMap::new();
    for (hit, s) in vector.into_iter().zip(vs) {
        merged.insert(hit.entry.entry_id.clone(), RetrievalHit { score: s, ..hit });
    }
    for (hit, s) in keyword.into_iter().zip(ks) {
        match merged.get_mut(&hit.entry.entry_id) {
            Some(existing) => {
                existing.score += s;
                existing.source = HitSource::Both;
            }
            None => {
                merged.insert(hit.entry.entry_id.clone(), RetrievalHit { score: s, ..hit });
            }
        }
    }
    let mut hits: Vec<RetrievalHit> = merged.into_values().collect();
    rank(&mut hits);
    hits
}
