//! The single entry point for every language-model interaction.
//!
//! A [`ModelGateway`] renders a versioned prompt template, consults the
//! response cache, and on a miss calls its provider with bounded retries and
//! bounded concurrency. Responses are post-processed per template (single
//! paragraph, length caps) before being cached.

mod gate;
pub mod offline;
mod remote;
mod template;

use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Mutex, RwLock};
use std::time::{Duration, Instant};

use rand::Rng;
use serde::{Deserialize, Serialize};

pub use gate::{Gate, GatePermit};
pub use remote::{AttemptError, OpenAiClient, API_KEY_ENV};
pub use template::{Bindings, PromptTemplate, TemplateId, TemplateSet};

use crate::ids::content_hash;
use crate::jsonl;

pub const SUMMARY_MAX_CHARS: usize = 480;
pub const CATEGORY_MAX_WORDS: usize = 6;

pub const ENDPOINT_ENV: &str = "LAKESCOPE_LLM_ENDPOINT";
pub const MODEL_ENV: &str = "LAKESCOPE_LLM_MODEL";

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GatewayError {
    #[error("provider unavailable after {attempts} attempt(s): {last_error}")]
    ProviderUnavailable { attempts: u32, last_error: String },
    #[error("template {template_id} has unbound placeholder `{placeholder}`")]
    Template {
        template_id: TemplateId,
        placeholder: String,
    },
    #[error("response rejected for {template_id}: {reason}")]
    ResponseRejected { template_id: TemplateId, reason: String },
    #[error("invalid provider configuration: {0}")]
    Config(String),
    #[error("gateway i/o: {0}")]
    Io(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProviderKind {
    Offline,
    Remote,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProviderConfig {
    pub provider_kind: ProviderKind,
    pub endpoint: Option<String>,
    pub model_name: Option<String>,
    pub max_retries: u32,
    #[serde(with = "duration_ms")]
    pub timeout: Duration,
    pub max_in_flight: usize,
    #[serde(with = "duration_ms")]
    pub backoff_base: Duration,
    #[serde(with = "duration_ms")]
    pub backoff_cap: Duration,
}

mod duration_ms {
    use serde::{Deserialize, Deserializer, Serializer};
    use std::time::Duration;

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u64(d.as_millis() as u64)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
        Ok(Duration::from_millis(u64::deserialize(d)?))
    }
}

impl ProviderConfig {
    pub fn offline() -> Self {
        Self {
            provider_kind: ProviderKind::Offline,
            endpoint: None,
            model_name: None,
            max_retries: 3,
            timeout: Duration::from_secs(30),
            max_in_flight: 4,
            backoff_base: Duration::from_millis(500),
            backoff_cap: Duration::from_secs(8),
        }
    }

    pub fn remote(endpoint: impl Into<String>, model: impl Into<String>) -> Self {
        Self {
            provider_kind: ProviderKind::Remote,
            endpoint: Some(endpoint.into()),
            model_name: Some(model.into()),
            ..Self::offline()
        }
    }

    /// Remote when `LAKESCOPE_LLM_ENDPOINT` is set and `force_offline` is false.
    pub fn from_env(force_offline: bool) -> Self {
        match std::env::var(ENDPOINT_ENV).ok().filter(|e| !e.is_empty()) {
            Some(endpoint) if !force_offline => {
                let model = std::env::var(MODEL_ENV).unwrap_or_else(|_| "gpt-4o-mini".into());
                Self::remote(endpoint, model)
            }
            _ => Self::offline(),
        }
    }

    pub fn validate(&self) -> Result<(), GatewayError> {
        if self.max_in_flight < 1 {
            return Err(GatewayError::Config("max_in_flight must be at least 1".into()));
        }
        if self.provider_kind == ProviderKind::Remote && self.endpoint.as_deref().is_none_or(str::is_empty) {
            return Err(GatewayError::Config("remote provider requires an endpoint".into()));
        }
        Ok(())
    }

    /// Full-jitter exponential backoff before retry number `retry` (1-based).
    pub fn backoff(&self, retry: u32) -> Duration {
        let exp = self
            .backoff_base
            .saturating_mul(1u32.checked_shl(retry.saturating_sub(1)).unwrap_or(u32::MAX));
        let ceiling = exp.min(self.backoff_cap);
        let nanos = ceiling.as_nanos() as u64;
        if nanos == 0 {
            return Duration::ZERO;
        }
        Duration::from_nanos(rand::thread_rng().gen_range(0..=nanos))
    }
}

/// What a provider sees for one attempt.
pub struct ProviderRequest<'a> {
    pub template_id: TemplateId,
    pub bindings: &'a Bindings,
    pub rendered_prompt: &'a str,
}

pub trait CompletionProvider: Send + Sync {
    fn kind(&self) -> ProviderKind;

    /// Identifies the responder for cache partitioning (kind plus model).
    fn fingerprint(&self) -> String;

    fn attempt(&self, request: &ProviderRequest<'_>) -> Result<String, AttemptError>;
}

#[derive(Debug, Default, Clone, Copy)]
pub struct OfflineProvider;

impl CompletionProvider for OfflineProvider {
    fn kind(&self) -> ProviderKind {
        ProviderKind::Offline
    }

    fn fingerprint(&self) -> String {
        "offline".into()
    }

    fn attempt(&self, request: &ProviderRequest<'_>) -> Result<String, AttemptError> {
        Ok(offline::respond(request.template_id, request.bindings))
    }
}

/// Always fails with a transient error; stands in for an unreachable
/// endpoint when exercising degradation paths.
#[derive(Debug, Default, Clone, Copy)]
pub struct UnreachableProvider;

impl CompletionProvider for UnreachableProvider {
    fn kind(&self) -> ProviderKind {
        ProviderKind::Remote
    }

    fn fingerprint(&self) -> String {
        "unreachable".into()
    }

    fn attempt(&self, _: &ProviderRequest<'_>) -> Result<String, AttemptError> {
        Err(AttemptError::Transient("connection refused".into()))
    }
}

impl ModelGateway {
    /// A remote-kind gateway whose every call fails immediately (no retries).
    pub fn unreachable() -> Self {
        let config = ProviderConfig {
            max_retries: 0,
            ..ProviderConfig::remote("http://127.0.0.1:9", "none")
        };
        Self::with_provider(config, TemplateSet::builtin(), Box::new(UnreachableProvider))
            .expect("static config is valid")
    }
}

pub struct RemoteProvider {
    client: OpenAiClient,
    model: String,
}

impl RemoteProvider {
    pub fn new(config: &ProviderConfig) -> Result<Self, GatewayError> {
        config.validate()?;
        let endpoint = config.endpoint.as_deref().unwrap_or_default();
        let model = config.model_name.clone().unwrap_or_else(|| "default".into());
        let client = OpenAiClient::new(endpoint, &model, config.timeout).map_err(GatewayError::Config)?;
        Ok(Self { client, model })
    }
}

impl CompletionProvider for RemoteProvider {
    fn kind(&self) -> ProviderKind {
        ProviderKind::Remote
    }

    fn fingerprint(&self) -> String {
        format!("remote:{}", self.model)
    }

    fn attempt(&self, request: &ProviderRequest<'_>) -> Result<String, AttemptError> {
        self.client.chat(request.rendered_prompt)
    }
}

/// Audit record of one `complete` call.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionRecord {
    pub request_hash: String,
    pub template_id: TemplateId,
    pub rendered_prompt: String,
    pub response_text: String,
    pub provider_kind: ProviderKind,
    pub latency_ms: u64,
    pub cached: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Completion {
    pub text: String,
    pub record: CompletionRecord,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct CacheEntry {
    key: String,
    request_hash: String,
    template_id: TemplateId,
    provider: String,
    response_text: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct GatewayStats {
    /// Provider attempts, including retries.
    pub provider_attempts: u64,
    pub cache_hits: u64,
    pub cache_misses: u64,
    pub in_flight: usize,
    pub peak_in_flight: usize,
}

pub struct ModelGateway {
    templates: TemplateSet,
    provider: Box<dyn CompletionProvider>,
    config: ProviderConfig,
    cache: RwLock<HashMap<String, String>>,
    cache_file: Mutex<Option<File>>,
    audit_file: Mutex<Option<File>>,
    gate: Gate,
    attempts: AtomicU64,
    hits: AtomicU64,
    misses: AtomicU64,
}

impl std::fmt::Debug for ModelGateway {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ModelGateway")
            .field("provider", &self.provider.fingerprint())
            .field("config", &self.config)
            .finish_non_exhaustive()
    }
}

impl ModelGateway {
    pub fn new(config: ProviderConfig, templates: TemplateSet) -> Result<Self, GatewayError> {
        config.validate()?;
        let provider: Box<dyn CompletionProvider> = match config.provider_kind {
            ProviderKind::Offline => Box::new(OfflineProvider),
            ProviderKind::Remote => Box::new(RemoteProvider::new(&config)?),
        };
        Self::with_provider(config, templates, provider)
    }

    pub fn offline() -> Self {
        Self::new(ProviderConfig::offline(), TemplateSet::builtin()).expect("offline config is valid")
    }

    pub fn with_provider(
        config: ProviderConfig,
        templates: TemplateSet,
        provider: Box<dyn CompletionProvider>,
    ) -> Result<Self, GatewayError> {
        config.validate()?;
        Ok(Self {
            gate: Gate::new(config.max_in_flight),
            templates,
            provider,
            config,
            cache: RwLock::new(HashMap::new()),
            cache_file: Mutex::new(None),
            audit_file: Mutex::new(None),
            attempts: AtomicU64::new(0),
            hits: AtomicU64::new(0),
            misses: AtomicU64::new(0),
        })
    }

    /// Loads `cache.jsonl` from `dir` and appends new responses (and the
    /// `audit.jsonl` completion log) there from now on.
    pub fn persist_to(self, dir: &Path) -> Result<Self, GatewayError> {
        std::fs::create_dir_all(dir).map_err(|e| GatewayError::Io(e.to_string()))?;
        let cache_path = dir.join("cache.jsonl");
        let entries: Vec<CacheEntry> =
            jsonl::read_tolerant(&cache_path).map_err(|e| GatewayError::Io(e.to_string()))?;
        {
            let mut cache = self.cache.write().expect("cache lock");
            for entry in entries {
                cache.insert(entry.key, entry.response_text);
            }
        }
        let open = |path: PathBuf| {
            OpenOptions::new()
                .create(true)
                .append(true)
                .open(&path)
                .map_err(|e| GatewayError::Io(format!("{}: {e}", path.display())))
        };
        *self.cache_file.lock().expect("cache file lock") = Some(open(cache_path)?);
        *self.audit_file.lock().expect("audit lock") = Some(open(dir.join("audit.jsonl"))?);
        Ok(self)
    }

    pub fn config(&self) -> &ProviderConfig {
        &self.config
    }

    pub fn templates(&self) -> &TemplateSet {
        &self.templates
    }

    pub fn provider_kind(&self) -> ProviderKind {
        self.provider.kind()
    }

    pub fn stats(&self) -> GatewayStats {
        GatewayStats {
            provider_attempts: self.attempts.load(Ordering::SeqCst),
            cache_hits: self.hits.load(Ordering::SeqCst),
            cache_misses: self.misses.load(Ordering::SeqCst),
            in_flight: self.gate.in_flight(),
            peak_in_flight: self.gate.peak(),
        }
    }

    pub fn render(&self, template_id: TemplateId, bindings: &Bindings) -> Result<String, GatewayError> {
        self.templates.get(template_id).render(bindings)
    }

    /// Pure function of (template id, template version, bindings).
    pub fn request_hash(&self, template_id: TemplateId, bindings: &Bindings) -> String {
        let version = self.templates.get(template_id).version.to_string();
        let mut parts: Vec<&str> = vec![template_id.as_str(), &version];
        for (k, v) in bindings {
            parts.push(k);
            parts.push(v);
        }
        content_hash(&parts)
    }

    pub fn complete(&self, template_id: TemplateId, bindings: &Bindings) -> Result<Completion, GatewayError> {
        let started = Instant::now();
        let rendered = self.render(template_id, bindings)?;
        let request_hash = self.request_hash(template_id, bindings);
        let fingerprint = self.provider.fingerprint();
        let key = content_hash(&[&fingerprint, &request_hash]);

        let cached = self.cache.read().expect("cache lock").get(&key).cloned();
        let (text, was_cached) = match cached {
            Some(text) => {
                self.hits.fetch_add(1, Ordering::SeqCst);
                (text, true)
            }
            None => {
                self.misses.fetch_add(1, Ordering::SeqCst);
                let raw = self.call_provider(template_id, bindings, &rendered)?;
                let text = finalize_response(template_id, &raw)?;
                self.store(CacheEntry {
                    key,
                    request_hash: request_hash.clone(),
                    template_id,
                    provider: fingerprint,
                    response_text: text.clone(),
                })?;
                (text, false)
            }
        };

        let record = CompletionRecord {
            request_hash,
            template_id,
            rendered_prompt: rendered,
            response_text: text.clone(),
            provider_kind: self.provider.kind(),
            latency_ms: started.elapsed().as_millis() as u64,
            cached: was_cached,
        };
        if let Some(file) = self.audit_file.lock().expect("audit lock").as_mut() {
            let mut line = serde_json::to_vec(&record).map_err(|e| GatewayError::Io(e.to_string()))?;
            line.push(b'\n');
            file.write_all(&line).map_err(|e| GatewayError::Io(e.to_string()))?;
        }
        Ok(Completion { text, record })
    }

    fn call_provider(
        &self,
        template_id: TemplateId,
        bindings: &Bindings,
        rendered: &str,
    ) -> Result<String, GatewayError> {
        let request = ProviderRequest {
            template_id,
            bindings,
            rendered_prompt: rendered,
        };
        let mut last_error = String::new();
        let mut attempts = 0;
        for retry in 0..=self.config.max_retries {
            if retry > 0 {
                std::thread::sleep(self.config.backoff(retry));
            }
            attempts += 1;
            self.attempts.fetch_add(1, Ordering::SeqCst);
            let outcome = {
                let _permit = self.gate.acquire();
                self.provider.attempt(&request)
            };
            match outcome {
                Ok(text) => return Ok(text),
                Err(AttemptError::Transient(e)) => {
                    tracing::warn!(template = %template_id, attempt = attempts, error = %e, "provider attempt failed");
                    last_error = e;
                }
                Err(AttemptError::Fatal(e)) => {
                    return Err(GatewayError::ProviderUnavailable {
                        attempts,
                        last_error: e,
                    })
                }
            }
        }
        Err(GatewayError::ProviderUnavailable { attempts, last_error })
    }

    fn store(&self, entry: CacheEntry) -> Result<(), GatewayError> {
        let mut file = self.cache_file.lock().expect("cache file lock");
        if let Some(file) = file.as_mut() {
            let mut line = serde_json::to_vec(&entry).map_err(|e| GatewayError::Io(e.to_string()))?;
            line.push(b'\n');
            file.write_all(&line).map_err(|e| GatewayError::Io(e.to_string()))?;
        }
        self.cache
            .write()
            .expect("cache lock")
            .insert(entry.key, entry.response_text);
        Ok(())
    }
}

/// Applies the per-template output rules to a raw provider response.
pub fn finalize_response(template_id: TemplateId, raw: &str) -> Result<String, GatewayError> {
    let reject = |reason: &str| GatewayError::ResponseRejected {
        template_id,
        reason: reason.to_string(),
    };
    let text = match template_id {
        TemplateId::NameCategory => {
            let line = raw.lines().map(str::trim).find(|l| !l.is_empty()).unwrap_or_default();
            let line = line.trim_matches(|c: char| c == '"' || c == '\'' || c == '`' || c == '*');
            let line = line.trim_end_matches(['.', '!', '?', ':', ';', ',']);
            line.split_whitespace()
                .take(CATEGORY_MAX_WORDS)
                .collect::<Vec<_>>()
                .join(" ")
        }
        _ => {
            let paragraph = raw.split_whitespace().collect::<Vec<_>>().join(" ");
            truncate_summary(&paragraph, SUMMARY_MAX_CHARS)
                .ok_or_else(|| reject("over-length with no sentence or word boundary"))?
        }
    };
    if text.is_empty() {
        return Err(reject("empty response"));
    }
    Ok(text)
}

/// Cuts `text` to at most `cap` characters at the last sentence end before
/// the cap, falling back to the last word boundary.
pub fn truncate_summary(text: &str, cap: usize) -> Option<String> {
    if text.chars().count() <= cap {
        return Some(text.to_string());
    }
    let cut = text.char_indices().nth(cap).map_or(text.len(), |(i, _)| i);
    let prefix = &text[..cut];
    let next_is_space = text[cut..].starts_with(' ');
    let sentence_end = prefix
        .char_indices()
        .filter(|&(i, c)| {
            matches!(c, '.' | '!' | '?') && {
                let after = i + c.len_utf8();
                if after == prefix.len() {
                    next_is_space
                } else {
                    prefix[after..].starts_with(' ')
                }
            }
        })
        .map(|(i, c)| i + c.len_utf8())
        .next_back();
    if let Some(end) = sentence_end {
        return Some(prefix[..end].to_string());
    }
    let word_end = prefix.rfind(' ')?;
    let out = prefix[..word_end].trim_end().to_string();
    (!out.is_empty()).then_some(out)
}
