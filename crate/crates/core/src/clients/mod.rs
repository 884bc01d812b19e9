//! Clients for external services: grammar checker, chat model, sentence
//! embeddings and a neural LM scorer.
//!
//! Every request goes through a content-addressed cache. Modes:
//! - `live`: cache, then the network (rate limited, retried);
//! - `cached_only`: cache or [`Error::CacheMiss`];
//! - `fallback`: the built-in offline provider for grammar and embeddings;
//!   chat and LM answers still come from the cache only.

pub mod cache;
pub mod limiter;
pub mod services;
pub mod transport;

use std::collections::HashMap;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;
use std::sync::{Arc, Mutex};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};

pub use cache::{cache_key, canonical_json, CacheEntry, ResponseCache};
pub use limiter::{Clock, RateLimiter, SystemClock, VirtualClock};
pub use services::{
    AnnotationFeedback, ChatClient, EmbeddingClient, FeedbackChain, GrammarClient, LmClient,
};
pub use transport::{Body, HttpRequest, HttpResponse, MockTransport, ReqwestTransport, Transport};

pub const ENV_GRAMMAR_URL: &str = "STYLO_GRAMMAR_URL";
pub const ENV_CHAT_URL: &str = "STYLO_CHAT_URL";
pub const ENV_EMBED_URL: &str = "STYLO_EMBED_URL";
pub const ENV_LM_URL: &str = "STYLO_LM_URL";
pub const ENV_API_KEY: &str = "STYLO_API_KEY";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProviderKind {
    Grammar,
    Chat,
    Embedding,
    Lm,
}

impl ProviderKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ProviderKind::Grammar => "grammar",
            ProviderKind::Chat => "chat",
            ProviderKind::Embedding => "embedding",
            ProviderKind::Lm => "lm",
        }
    }

    pub fn env_url(self) -> &'static str {
        match self {
            ProviderKind::Grammar => ENV_GRAMMAR_URL,
            ProviderKind::Chat => ENV_CHAT_URL,
            ProviderKind::Embedding => ENV_EMBED_URL,
            ProviderKind::Lm => ENV_LM_URL,
        }
    }
}

impl fmt::Display for ProviderKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Live,
    CachedOnly,
    #[default]
    Fallback,
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "live" => Ok(Mode::Live),
            "cached_only" | "cached-only" => Ok(Mode::CachedOnly),
            "fallback" => Ok(Mode::Fallback),
            _ => Err(Error::InvalidArgument(format!(
                "unknown provider mode `{s}` (live, cached_only, fallback)"
            ))),
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Live => "live",
            Mode::CachedOnly => "cached_only",
            Mode::Fallback => "fallback",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProviderConfig {
    pub kind: ProviderKind,
    pub endpoint: Option<String>,
    pub timeout_secs: f64,
    pub max_retries: u32,
    /// Requests per second; 0 disables limiting.
    pub rate_limit: f64,
    pub cache_path: Option<PathBuf>,
    pub mode: Mode,
    /// Embedding dimension reported by the service.
    pub dim: Option<usize>,
    #[serde(skip)]
    pub api_key: Option<String>,
}

impl ProviderConfig {
    pub fn new(kind: ProviderKind, mode: Mode) -> ProviderConfig {
        ProviderConfig {
            kind,
            endpoint: None,
            timeout_secs: 30.0,
            max_retries: 3,
            rate_limit: 2.0,
            cache_path: None,
            mode,
            dim: None,
            api_key: None,
        }
    }

    /// Fill the endpoint and key from the environment when unset.
    pub fn with_env(mut self) -> ProviderConfig {
        if self.endpoint.is_none() {
            self.endpoint = std::env::var(self.kind.env_url()).ok().filter(|s| !s.is_empty());
        }
        if self.api_key.is_none() {
            self.api_key = std::env::var(ENV_API_KEY).ok().filter(|s| !s.is_empty());
        }
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.timeout_secs > 0.0) {
            return Err(Error::InvalidArgument("timeout must be positive".into()));
        }
        match self.mode {
            Mode::Live if self.endpoint.is_none() => Err(Error::InvalidArgument(format!(
                "{} provider in live mode needs an endpoint (set {})",
                self.kind,
                self.kind.env_url()
            ))),
            Mode::CachedOnly => match &self.cache_path {
                Some(p) if p.exists() => Ok(()),
                Some(p) => Err(Error::InvalidArgument(format!(
                    "{} provider in cached_only mode: cache {} does not exist",
                    self.kind,
                    p.display()
                ))),
                None => Err(Error::InvalidArgument(format!(
                    "{} provider in cached_only mode needs a cache path",
                    self.kind
                ))),
            },
            _ => Ok(()),
        }
    }

    pub fn version(&self) -> String {
        format!(
            "{}@{}",
            self.kind,
            self.endpoint.as_deref().unwrap_or("offline")
        )
    }
}

/// Shared machinery: cache lookup, in-flight de-duplication, rate limiting
/// and retries.
pub struct ServiceClient {
    pub config: ProviderConfig,
    cache: Option<Arc<ResponseCache>>,
    transport: Arc<dyn Transport>,
    limiter: RateLimiter,
    clock: Arc<dyn Clock>,
    inflight: Mutex<HashMap<String, Arc<Mutex<()>>>>,
}

impl ServiceClient {
    pub fn new(config: ProviderConfig, transport: Arc<dyn Transport>, clock: Arc<dyn Clock>) -> Result<Self> {
        config.validate()?;
        let cache = match (&config.cache_path, config.mode) {
            (Some(p), Mode::CachedOnly) => Some(Arc::new(ResponseCache::open_read_only(p)?)),
            (Some(p), _) => Some(Arc::new(ResponseCache::open(p)?)),
            (None, _) => None,
        };
        Ok(ServiceClient {
            limiter: RateLimiter::new(config.rate_limit),
            config,
            cache,
            transport,
            clock,
            inflight: Mutex::new(HashMap::new()),
        })
    }

    /// Live-capable client over real HTTP.
    pub fn http(config: ProviderConfig) -> Result<Self> {
        Self::new(
            config,
            Arc::new(ReqwestTransport::new()?),
            Arc::new(SystemClock::default()),
        )
    }

    pub fn mode(&self) -> Mode {
        self.config.mode
    }

    pub fn cache(&self) -> Option<&ResponseCache> {
        self.cache.as_deref()
    }

    pub fn cached(&self, request: &Value) -> Result<Option<Value>> {
        match &self.cache {
            Some(c) => c.get_value(&cache_key(self.config.kind.as_str(), request)),
            None => Ok(None),
        }
    }

    fn key_lock(&self, key: &str) -> Arc<Mutex<()>> {
        self.inflight
            .lock()
            .expect("inflight lock")
            .entry(key.to_string())
            .or_default()
            .clone()
    }

    /// Resolve `request` from the cache or, in live mode, via `build`.
    /// Returns `None` in fallback mode when the cache has no answer.
    pub fn resolve(
        &self,
        request: &Value,
        build: impl Fn(&ProviderConfig) -> HttpRequest,
        parse: impl Fn(&str) -> Result<Value>,
    ) -> Result<Option<Value>> {
        let kind = self.config.kind.as_str();
        let key = cache_key(kind, request);
        let lock = self.key_lock(&key);
        let _guard = lock.lock().expect("key lock");
        if let Some(v) = self.cached(request)? {
            return Ok(Some(v));
        }
        match self.config.mode {
            Mode::CachedOnly => Err(Error::CacheMiss {
                kind: kind.to_string(),
            }),
            Mode::Fallback => Ok(None),
            Mode::Live => {
                let http = build(&self.config);
                let body = self.send_with_retries(&http)?;
                let value = parse(&body).map_err(|e| {
                    Error::provider(self.config.version(), format!("malformed response: {e}"))
                })?;
                if let Some(c) = &self.cache {
                    c.put(kind, &key, &value, &self.config.version())?;
                }
                Ok(Some(value))
            }
        }
    }

    pub(crate) fn send_with_retries(&self, req: &HttpRequest) -> Result<String> {
        let mut last = None;
        for attempt in 0..=self.config.max_retries {
            if attempt > 0 {
                self.clock
                    .sleep(Duration::from_millis(200 * (1 << (attempt - 1).min(6))));
            }
            self.limiter.acquire(self.clock.as_ref());
            match self.transport.post(req) {
                Ok(r) if (200..300).contains(&r.status) => return Ok(r.body),
                Ok(r) if r.status == 429 || r.status >= 500 => {
                    last = Some(Error::provider(self.config.version(), format!("HTTP {}", r.status)));
                }
                Ok(r) => {
                    return Err(Error::provider(
                        self.config.version(),
                        format!("HTTP {}: {}", r.status, r.body.chars().take(200).collect::<String>()),
                    ))
                }
                Err(e) => last = Some(e),
            }
        }
        Err(last
            .unwrap_or_else(|| Error::provider(self.config.version(), "no attempt made"))
            .with_context(format!("after {} retries", self.config.max_retries)))
    }
}

pub fn parse_json(body: &str) -> Result<Value> {
    Ok(serde_json::from_str(body)?)
}
