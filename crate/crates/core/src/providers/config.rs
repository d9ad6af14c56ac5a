//! Provider configuration and construction.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::fixture::{FixtureAsr, FixtureDetector, FixtureDiarizer, FixtureSearch};
use super::hash_embed::{HashEmbedder, DEFAULT_DIMENSION};
use super::limiter::Limited;
use super::live::{Endpoint, LiveAsr, LiveChat, LiveDetector, LiveDiarizer, LiveEmbedder, LiveSearch, RetryPolicy};
use super::scripted::{Script, ScriptedChat};
use super::simulated::SimulatedModel;
use super::{
    AsrProvider, ChatProvider, DetectorProvider, DiarizationProvider, EmbeddingProvider, ProviderError, SearchProvider,
    SearchSnippet,
};
use crate::video::VideoSource;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProviderKind {
    LiveHttp,
    ScriptedMock,
    HashMock,
    /// The offline model reading structured prompt contexts.
    Simulated,
    /// Ground truth shipped with the video manifests (or a search map).
    Fixture,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProviderConfig {
    pub kind: ProviderKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub endpoint: Option<String>,
    /// Name of the environment variable holding the API key.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub auth: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub script_path: Option<PathBuf>,
    /// Answers requests a script does not cover.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fallback: Option<Box<ProviderConfig>>,
    #[serde(default = "default_timeout")]
    pub timeout: f64,
    #[serde(default = "default_retries")]
    pub max_retries: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dimension: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_concurrency: Option<usize>,
}

fn default_timeout() -> f64 {
    60.0
}

fn default_retries() -> u32 {
    2
}

impl ProviderConfig {
    pub fn of(kind: ProviderKind) -> Self {
        ProviderConfig {
            kind,
            endpoint: None,
            auth: None,
            script_path: None,
            fallback: None,
            timeout: default_timeout(),
            max_retries: default_retries(),
            dimension: None,
            max_concurrency: None,
        }
    }

    pub fn scripted(path: impl Into<PathBuf>, fallback: Option<ProviderConfig>) -> Self {
        ProviderConfig {
            script_path: Some(path.into()),
            fallback: fallback.map(Box::new),
            ..ProviderConfig::of(ProviderKind::ScriptedMock)
        }
    }

    /// Live endpoints may come from the environment, so only the static
    /// shape is checked here.
    pub fn validate(&self, role: &str) -> Result<(), ProviderError> {
        let bad = |msg: &str| Err(ProviderError::Unconfigured(format!("{role}: {msg}")));
        if self.kind == ProviderKind::ScriptedMock && self.script_path.is_none() {
            return bad("scripted_mock requires script_path");
        }
        if !(self.timeout > 0.0 && self.timeout.is_finite()) {
            return bad("timeout must be positive");
        }
        if self.dimension == Some(0) {
            return bad("dimension must be positive");
        }
        if let Some(f) = &self.fallback {
            f.validate(role)?;
        }
        Ok(())
    }

    fn endpoint(&self, role: &str) -> Result<Endpoint, ProviderError> {
        let mut e = Endpoint::from_env(role);
        if let Some(url) = &self.endpoint {
            e.url = Some(url.clone());
        }
        if let Some(var) = &self.auth {
            e.key = std::env::var(var).ok();
        }
        if e.url.is_none() {
            return Err(ProviderError::Unconfigured(format!(
                "{role}: live_http requires an endpoint (config or OM_PROVIDER_{}_URL)",
                role.to_ascii_uppercase()
            )));
        }
        e.timeout = Duration::from_secs_f64(self.timeout);
        e.retry = RetryPolicy { max_retries: self.max_retries, ..RetryPolicy::default() };
        Ok(e)
    }

    fn wrong_kind(&self, role: &str) -> ProviderError {
        ProviderError::Unconfigured(format!("{role}: kind {:?} is not available here", self.kind))
    }

    fn script(&self, base: &Path) -> Result<PathBuf, ProviderError> {
        let p = self.script_path.as_ref().ok_or_else(|| ProviderError::Unconfigured("script_path missing".into()))?;
        Ok(if p.is_absolute() { p.clone() } else { base.join(p) })
    }

    pub fn build_chat(&self, role: &str, base: &Path) -> Result<Arc<dyn ChatProvider>, ProviderError> {
        self.validate(role)?;
        let p: Arc<dyn ChatProvider> = match self.kind {
            ProviderKind::LiveHttp => Arc::new(LiveChat::new(self.endpoint(role)?)),
            ProviderKind::Simulated => Arc::new(SimulatedModel::new(role)),
            ProviderKind::ScriptedMock => {
                let mut chat = ScriptedChat::new(role, Script::load(&self.script(base)?)?);
                if let Some(f) = &self.fallback {
                    chat = chat.with_fallback(f.build_chat(role, base)?);
                }
                Arc::new(chat)
            }
            _ => return Err(self.wrong_kind(role)),
        };
        Ok(match self.max_concurrency {
            Some(n) => Arc::new(Limited::new(p, n)),
            None => p,
        })
    }

    pub fn build_embedder(&self, role: &str) -> Result<Arc<dyn EmbeddingProvider>, ProviderError> {
        self.validate(role)?;
        let dim = self.dimension.unwrap_or(DEFAULT_DIMENSION);
        let p: Arc<dyn EmbeddingProvider> = match self.kind {
            ProviderKind::HashMock => Arc::new(HashEmbedder::new(dim)),
            ProviderKind::LiveHttp => Arc::new(LiveEmbedder::new(self.endpoint(role)?, dim)),
            _ => return Err(self.wrong_kind(role)),
        };
        Ok(match self.max_concurrency {
            Some(n) => Arc::new(Limited::new(p, n)),
            None => p,
        })
    }
}

/// One provider per role. Absent optional roles disable that stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProvidersConfig {
    /// Conqueror, divider, synthesis and time-filter calls.
    pub agent: ProviderConfig,
    /// Scene captions and rewinder questions.
    pub mllm: ProviderConfig,
    pub embedder: ProviderConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub asr: Option<ProviderConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diarizer: Option<ProviderConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detector: Option<ProviderConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub search: Option<ProviderConfig>,
}

impl Default for ProvidersConfig {
    /// Fully offline: simulated models, hash embeddings, fixture services.
    fn default() -> Self {
        ProvidersConfig {
            agent: ProviderConfig::of(ProviderKind::Simulated),
            mllm: ProviderConfig::of(ProviderKind::Simulated),
            embedder: ProviderConfig::of(ProviderKind::HashMock),
            asr: Some(ProviderConfig::of(ProviderKind::Fixture)),
            diarizer: Some(ProviderConfig::of(ProviderKind::Fixture)),
            detector: Some(ProviderConfig::of(ProviderKind::Fixture)),
            search: None,
        }
    }
}

pub struct ProviderSet {
    pub agent: Arc<dyn ChatProvider>,
    pub mllm: Arc<dyn ChatProvider>,
    pub embedder: Arc<dyn EmbeddingProvider>,
    pub asr: Option<Arc<dyn AsrProvider>>,
    pub diarizer: Option<Arc<dyn DiarizationProvider>>,
    pub detector: Option<Arc<dyn DetectorProvider>>,
    pub search: Option<Arc<dyn SearchProvider>>,
}

impl ProvidersConfig {
    pub fn load(path: &Path) -> Result<Self, ProviderError> {
        let text = fs::read_to_string(path).map_err(|e| ProviderError::Fixture(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| ProviderError::Fixture(format!("{}: {e}", path.display())))
    }

    pub fn save(&self, path: &Path) -> std::io::Result<()> {
        fs::write(path, serde_json::to_string_pretty(self).expect("config serializes"))
    }

    /// Builds every provider. Relative script paths resolve against `base`;
    /// fixture services read from `sources`.
    pub fn build(&self, base: &Path, sources: &[VideoSource]) -> Result<ProviderSet, ProviderError> {
        fn optional<T: ?Sized>(
            cfg: &Option<ProviderConfig>,
            role: &str,
            fixture: impl FnOnce(&ProviderConfig) -> Result<Arc<T>, ProviderError>,
            live: impl FnOnce(Endpoint) -> Arc<T>,
        ) -> Result<Option<Arc<T>>, ProviderError> {
            let Some(cfg) = cfg else { return Ok(None) };
            cfg.validate(role)?;
            match cfg.kind {
                ProviderKind::Fixture => fixture(cfg).map(Some),
                ProviderKind::LiveHttp => Ok(Some(live(cfg.endpoint(role)?))),
                _ => Err(cfg.wrong_kind(role)),
            }
        }

        Ok(ProviderSet {
            agent: self.agent.build_chat("agent", base)?,
            mllm: self.mllm.build_chat("mllm", base)?,
            embedder: self.embedder.build_embedder("embedder")?,
            asr: optional(
                &self.asr,
                "asr",
                |_| Ok(Arc::new(FixtureAsr::from_sources(sources)) as Arc<dyn AsrProvider>),
                |e| Arc::new(LiveAsr::new(e)),
            )?,
            diarizer: optional(
                &self.diarizer,
                "diarizer",
                |_| Ok(Arc::new(FixtureDiarizer::from_sources(sources)) as Arc<dyn DiarizationProvider>),
                |e| Arc::new(LiveDiarizer::new(e)),
            )?,
            detector: optional(
                &self.detector,
                "detector",
                |_| Ok(Arc::new(FixtureDetector::from_sources(sources)) as Arc<dyn DetectorProvider>),
                |e| Arc::new(LiveDetector::new(e)),
            )?,
            search: optional(
                &self.search,
                "search",
                |cfg| {
                    let answers: BTreeMap<String, Vec<SearchSnippet>> = match &cfg.script_path {
                        None => BTreeMap::new(),
                        Some(_) => {
                            let path = cfg.script(base)?;
                            let text = fs::read_to_string(&path)
                                .map_err(|e| ProviderError::Fixture(format!("{}: {e}", path.display())))?;
                            serde_json::from_str(&text)
                                .map_err(|e| ProviderError::Fixture(format!("{}: {e}", path.display())))?
                        }
                    };
                    Ok(Arc::new(FixtureSearch::new(answers)) as Arc<dyn SearchProvider>)
                },
                |e| Arc::new(LiveSearch::new(e)),
            )?,
        })
    }
}
