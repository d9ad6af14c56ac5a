//! A directory holding everything one deployment needs: provider and engine
//! settings, the index of ingested manifests and the knowledge store.
//!
//! ```text
//! <root>/providers.json   ProvidersConfig (optional; offline defaults)
//! <root>/settings.json    Settings (optional)
//! <root>/videos.json      video_id -> manifest path
//! <root>/store/           entries.log + meta
//! ```

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::engine::Rescuer;
use crate::error::{Error, Result};
use crate::eval::{Answerer, FramesStt, Mode, OmAgent, Video2Rag, STT_FRAMES};
use crate::providers::{ProviderSet, ProvidersConfig};
use crate::query::{FinalAnswer, Pipeline, Query, QueryConfig};
use crate::store::KnowledgeStore;
use crate::toolbox::{
    CodeExecTool, CommandInstaller, FaceRecognition, FileTool, Installer, Rewinder, ToolRegistry, WebSearch,
};
use crate::video::{
    ingest, AnnotationRenderer, BoxRenderer, DetectionParams, IngestProviders, IngestReport, VideoLibrary, VideoType,
};

pub const PROVIDERS_FILE: &str = "providers.json";
pub const SETTINGS_FILE: &str = "settings.json";
pub const INDEX_FILE: &str = "videos.json";
pub const STORE_DIR: &str = "store";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Settings {
    pub detection: DetectionParams,
    pub query: QueryConfig,
    /// Segments captioned at once during ingestion.
    pub ingest_concurrency: usize,
    /// Questions answered at once during evaluation.
    pub eval_concurrency: usize,
    /// First rescuer backoff for upstream failures, doubled per attempt.
    pub rescue_backoff_ms: u64,
    /// Working directory of `code_exec`; `<root>/sandbox` when unset.
    pub sandbox: Option<PathBuf>,
    /// Root of `file_reader`; `<root>/files` when unset.
    pub files_root: Option<PathBuf>,
    /// Packages the rescuer may pip-install into the sandbox.
    pub install_allowlist: Vec<String>,
}

impl Default for Settings {
    fn default() -> Self {
        Settings {
            detection: DetectionParams::default(),
            query: QueryConfig::default(),
            ingest_concurrency: 4,
            eval_concurrency: 1,
            rescue_backoff_ms: 250,
            sandbox: None,
            files_root: None,
            install_allowlist: Vec::new(),
        }
    }
}

fn load_json<T: for<'de> Deserialize<'de> + Default>(path: &Path) -> Result<T> {
    if !path.exists() {
        return Ok(T::default());
    }
    serde_json::from_str(&fs::read_to_string(path)?).map_err(|e| Error::invalid(format!("{}: {e}", path.display())))
}

pub struct Workspace {
    root: PathBuf,
    pub config: ProvidersConfig,
    pub settings: Settings,
    library: VideoLibrary,
    store: KnowledgeStore,
}

/// Providers and tools built for a batch of work.
pub struct Session {
    pub providers: ProviderSet,
    pub tools: ToolRegistry,
    pub rescuer: Rescuer,
    pub library: Arc<VideoLibrary>,
    renderer: Arc<dyn AnnotationRenderer>,
}

impl Workspace {
    /// Opens `root`, creating it if needed.
    pub fn open(root: &Path) -> Result<Self> {
        fs::create_dir_all(root)?;
        let config: ProvidersConfig = if root.join(PROVIDERS_FILE).exists() {
            ProvidersConfig::load(&root.join(PROVIDERS_FILE))?
        } else {
            ProvidersConfig::default()
        };
        let settings: Settings = load_json(&root.join(SETTINGS_FILE))?;
        settings.detection.validate()?;
        settings.query.engine.validate()?;
        let dim = config.embedder.build_embedder("embedder")?.dimension();
        let store = KnowledgeStore::open(&root.join(STORE_DIR), Some(dim))?;
        let library = VideoLibrary::load_index(&root.join(INDEX_FILE))?;
        Ok(Workspace { root: root.to_path_buf(), config, settings, library, store })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn store(&self) -> &KnowledgeStore {
        &self.store
    }

    pub fn library(&self) -> &VideoLibrary {
        &self.library
    }

    pub fn video_types(&self) -> BTreeMap<String, VideoType> {
        self.library.sources().into_iter().filter_map(|s| s.video_type.map(|t| (s.video_id, t))).collect()
    }

    pub fn session(&self) -> Result<Session> {
        let providers = self.config.build(&self.root, &self.library.sources())?;
        let library = Arc::new(self.library.clone());
        let renderer: Arc<dyn AnnotationRenderer> = Arc::new(BoxRenderer::new(self.root.join("annotated")));
        let sandbox = self.settings.sandbox.clone().unwrap_or_else(|| self.root.join("sandbox"));
        let files = self.settings.files_root.clone().unwrap_or_else(|| self.root.join("files"));
        let mut tools = ToolRegistry::new();
        tools.register(Arc::new(
            Rewinder::new(library.clone(), providers.mllm.clone())
                .with_detector(providers.detector.clone())
                .with_renderer(Some(renderer.clone())),
        ))?;
        tools.register(Arc::new(WebSearch::new(providers.search.clone())))?;
        tools.register(Arc::new(FaceRecognition::new(library.clone(), providers.detector.clone())))?;
        tools.register(Arc::new(FileTool::new(files)))?;
        tools.register(Arc::new(CodeExecTool::new(sandbox.clone())))?;
        let installer: Option<Arc<dyn Installer>> = (!self.settings.install_allowlist.is_empty()).then(|| {
            Arc::new(CommandInstaller::pip_target(&sandbox, self.settings.install_allowlist.clone()))
                as Arc<dyn Installer>
        });
        let rescuer = Rescuer::new(installer, Duration::from_millis(self.settings.rescue_backoff_ms));
        Ok(Session { providers, tools, rescuer, library, renderer })
    }

    /// Registers the manifest's video and ingests it into the store.
    pub fn ingest(&mut self, manifest: &Path, params: Option<DetectionParams>) -> Result<IngestReport> {
        let params = params.unwrap_or(self.settings.detection);
        params.validate()?;
        let source = self.library.insert_manifest(manifest)?;
        self.library.save_index(&self.root.join(INDEX_FILE))?;
        let session = self.session()?;
        let p = &session.providers;
        let providers = IngestProviders {
            mllm: p.mllm.as_ref(),
            embedder: p.embedder.as_ref(),
            asr: p.asr.as_deref(),
            diarizer: p.diarizer.as_deref(),
            detector: p.detector.as_deref(),
            renderer: Some(session.renderer.as_ref()),
            concurrency: self.settings.ingest_concurrency.max(1),
        };
        let report = ingest(&source, &params, &providers, &self.store)?;
        self.store.compact()?;
        Ok(report)
    }

    pub fn pipeline<'a>(&'a self, session: &'a Session, config: QueryConfig) -> Pipeline<'a> {
        Pipeline {
            store: &self.store,
            embedder: session.providers.embedder.as_ref(),
            agent: session.providers.agent.as_ref(),
            tools: &session.tools,
            rescuer: &session.rescuer,
            config,
        }
    }

    /// Answers one question; `video_id` None searches every video.
    pub fn ask(
        &self,
        session: &Session,
        text: &str,
        video_id: Option<&str>,
        config: QueryConfig,
    ) -> Result<FinalAnswer> {
        if let Some(id) = video_id {
            self.library.require(id)?;
        }
        let query = Query::new(text, video_id.map(str::to_string))?;
        self.pipeline(session, config).answer(query)
    }

    pub fn answerer<'a>(&'a self, session: &'a Session, mode: Mode, global: bool) -> Box<dyn Answerer + 'a> {
        let p = &session.providers;
        match mode {
            Mode::Omagent => Box::new(OmAgent { pipeline: self.pipeline(session, self.settings.query), global }),
            Mode::FramesStt => Box::new(FramesStt {
                library: &session.library,
                mllm: p.mllm.as_ref(),
                detector: p.detector.as_deref(),
                frames: STT_FRAMES,
            }),
            Mode::Video2rag => Box::new(Video2Rag {
                k: self.settings.query.k,
                pad: self.settings.query.pad,
                global,
                ..Video2Rag::new(&self.store, p.embedder.as_ref(), p.agent.as_ref())
            }),
        }
    }
}
