use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{VideoManifest, VideoSource};
use crate::error::{Error, Result};

/// Original sources of every ingested video, kept for the rewinder and the
/// fixture services. On disk it is an index of manifest paths.
#[derive(Debug, Clone, Default)]
pub struct VideoLibrary {
    videos: BTreeMap<String, Arc<VideoSource>>,
    manifests: BTreeMap<String, PathBuf>,
}

#[derive(Serialize, Deserialize)]
struct IndexEntry {
    manifest: PathBuf,
}

impl VideoLibrary {
    pub fn new() -> Self {
        VideoLibrary::default()
    }

    /// Adds or replaces a source.
    pub fn insert(&mut self, source: VideoSource) -> Result<Arc<VideoSource>> {
        source.validate()?;
        let source = Arc::new(source);
        self.videos.insert(source.video_id.clone(), source.clone());
        Ok(source)
    }

    pub fn insert_manifest(&mut self, path: &Path) -> Result<Arc<VideoSource>> {
        let source = VideoManifest::load_source(path)?;
        let abs = fs::canonicalize(path).unwrap_or_else(|_| path.to_path_buf());
        self.manifests.insert(source.video_id.clone(), abs);
        self.insert(source)
    }

    pub fn get(&self, video_id: &str) -> Option<&Arc<VideoSource>> {
        self.videos.get(video_id)
    }

    pub fn require(&self, video_id: &str) -> Result<&Arc<VideoSource>> {
        self.get(video_id).ok_or_else(|| Error::UnknownVideo(video_id.to_string()))
    }

    pub fn ids(&self) -> Vec<String> {
        self.videos.keys().cloned().collect()
    }

    pub fn sources(&self) -> Vec<VideoSource> {
        self.videos.values().map(|s| (**s).clone()).collect()
    }

    pub fn len(&self) -> usize {
        self.videos.len()
    }

    pub fn is_empty(&self) -> bool {
        self.videos.is_empty()
    }

    /// Writes `{video_id: {"manifest": path}}` for manifest-backed videos.
    pub fn save_index(&self, path: &Path) -> Result<()> {
        let index: BTreeMap<&String, IndexEntry> =
            self.manifests.iter().map(|(id, p)| (id, IndexEntry { manifest: p.clone() })).collect();
        fs::write(path, serde_json::to_string_pretty(&index)?)?;
        Ok(())
    }

    /// Reloads every manifest named in an index file. A missing index file
    /// gives an empty library.
    pub fn load_index(path: &Path) -> Result<Self> {
        let mut lib = VideoLibrary::new();
        if !path.exists() {
            return Ok(lib);
        }
        let index: BTreeMap<String, IndexEntry> = serde_json::from_str(&fs::read_to_string(path)?)?;
        for (id, entry) in index {
            let source = lib.insert_manifest(&entry.manifest)?;
            if source.video_id != id {
                return Err(Error::invalid(format!(
                    "index names {id} but {} holds {}",
                    entry.manifest.display(),
                    source.video_id
                )));
            }
        }
        Ok(lib)
    }
}
