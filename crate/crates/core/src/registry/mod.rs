//! Named, replaceable strategies for clustering, embedding and relation
//! scoring. Built-ins run in process; external strategies are executables
//! speaking the line protocol in [`plugin`].
//!
//! Every result, built-in or external, passes the kind's contract check
//! before it is returned.

pub mod contract;
pub mod plugin;
mod adapters;

use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::cluster::spherical_kmeans;
use crate::embed::{Embedder, EmbeddingVector, OfflineHashEmbedder, DEFAULT_DIM};

pub use adapters::{StrategyClusterer, StrategyEmbedder, StrategyRelationScorer};
use contract::*;
use plugin::PluginProcess;

pub const CONTRACT_VERSION: u32 = 1;
pub const DEFAULT_PLUGIN_TIMEOUT: Duration = Duration::from_secs(60);

pub const BUILTIN_CLUSTERING: &str = "spherical-kmeans";
pub const BUILTIN_EMBEDDING: &str = "offline-hash";
pub const BUILTIN_RELATION: &str = "cosine-top-m";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StrategyKind {
    Clustering,
    Embedding,
    Relation,
}

impl StrategyKind {
    pub const ALL: [StrategyKind; 3] = [StrategyKind::Clustering, StrategyKind::Embedding, StrategyKind::Relation];

    pub fn as_str(self) -> &'static str {
        match self {
            StrategyKind::Clustering => "clustering",
            StrategyKind::Embedding => "embedding",
            StrategyKind::Relation => "relation",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.as_str() == s)
    }

    /// Protocol operation name for invocations of this kind.
    pub fn operation(self) -> &'static str {
        match self {
            StrategyKind::Clustering => "cluster",
            StrategyKind::Embedding => "embed",
            StrategyKind::Relation => "relate",
        }
    }

    fn builtin(self) -> &'static str {
        match self {
            StrategyKind::Clustering => BUILTIN_CLUSTERING,
            StrategyKind::Embedding => BUILTIN_EMBEDDING,
            StrategyKind::Relation => BUILTIN_RELATION,
        }
    }
}

impl std::fmt::Display for StrategyKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StrategySource {
    Builtin,
    External,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StrategyDescriptor {
    pub name: String,
    pub kind: StrategyKind,
    pub source: StrategySource,
    /// Built-in identifier or absolute executable path.
    pub entrypoint: String,
    pub declared_contract_version: u32,
    pub active: bool,
    /// Output dimension declared by an embedding strategy.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub declared_dim: Option<usize>,
}

impl StrategyDescriptor {
    pub fn builtin(kind: StrategyKind, name: &str) -> Self {
        Self {
            name: name.to_string(),
            kind,
            source: StrategySource::Builtin,
            entrypoint: name.to_string(),
            declared_contract_version: CONTRACT_VERSION,
            active: false,
            declared_dim: None,
        }
    }

    pub fn external(kind: StrategyKind, name: &str, executable: impl AsRef<Path>) -> Self {
        Self {
            name: name.to_string(),
            kind,
            source: StrategySource::External,
            entrypoint: executable.as_ref().display().to_string(),
            declared_contract_version: CONTRACT_VERSION,
            active: false,
            declared_dim: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum RegistryError {
    #[error("a {kind} strategy named {name} is already registered")]
    DuplicateName { kind: StrategyKind, name: String },
    #[error("no {kind} strategy named {name}")]
    UnknownStrategy { kind: StrategyKind, name: String },
    #[error("handshake failed: {0}")]
    HandshakeFailed(String),
    #[error("registered as {expected} but the handshake declares {declared}")]
    KindMismatch { expected: StrategyKind, declared: StrategyKind },
    #[error("no active {0} strategy")]
    NoActiveStrategy(StrategyKind),
    #[error("plugin did not answer within {0:?}")]
    PluginTimeout(Duration),
    #[error("plugin exited: {0}")]
    PluginExited(String),
    #[error("plugin protocol error: {0}")]
    Protocol(String),
    #[error("strategy failed: {0}")]
    StrategyFailed(String),
    #[error("contract violation: {0}")]
    ContractViolation(String),
    #[error("invalid payload: {0}")]
    InvalidPayload(String),
    #[error("corrupt registry: {0}")]
    Corrupt(String),
    #[error("registry i/o: {0}")]
    Io(String),
}

#[derive(Serialize, Deserialize)]
struct RegistryFile {
    contract_version: u32,
    strategies: Vec<StrategyDescriptor>,
}

type ProcessSlot = Arc<Mutex<Option<PluginProcess>>>;

pub struct Registry {
    strategies: Mutex<Vec<StrategyDescriptor>>,
    processes: Mutex<HashMap<(StrategyKind, String), ProcessSlot>>,
    path: Option<PathBuf>,
    timeout: Duration,
    builtin_dim: usize,
}

impl std::fmt::Debug for Registry {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Registry")
            .field("strategies", &self.list())
            .field("path", &self.path)
            .finish_non_exhaustive()
    }
}

fn defaults() -> Vec<StrategyDescriptor> {
    StrategyKind::ALL
        .into_iter()
        .map(|k| StrategyDescriptor {
            active: true,
            ..StrategyDescriptor::builtin(k, k.builtin())
        })
        .collect()
}

fn is_builtin(kind: StrategyKind, entrypoint: &str) -> bool {
    kind.builtin() == entrypoint
}

impl Registry {
    /// Built-ins only, all active, nothing persisted.
    pub fn in_memory() -> Self {
        Self {
            strategies: Mutex::new(defaults()),
            processes: Mutex::new(HashMap::new()),
            path: None,
            timeout: DEFAULT_PLUGIN_TIMEOUT,
            builtin_dim: DEFAULT_DIM,
        }
    }

    /// Loads `path` (usually `strategies.json`), creating it with the
    /// built-ins when missing.
    pub fn open(path: &Path) -> Result<Self, RegistryError> {
        let mut registry = Self::in_memory();
        registry.path = Some(path.to_path_buf());
        match std::fs::read(path) {
            Ok(bytes) => {
                let file: RegistryFile =
                    serde_json::from_slice(&bytes).map_err(|e| RegistryError::Corrupt(e.to_string()))?;
                let mut list = file.strategies;
                for d in defaults() {
                    if !list.iter().any(|s| s.kind == d.kind && s.name == d.name) {
                        let has_active = list.iter().any(|s| s.kind == d.kind && s.active);
                        list.push(StrategyDescriptor { active: !has_active, ..d });
                    }
                }
                check_active(&list)?;
                *registry.strategies.get_mut().expect("registry lock") = list;
            }
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => registry.save()?,
            Err(e) => return Err(RegistryError::Io(e.to_string())),
        }
        Ok(registry)
    }

    pub fn with_timeout(mut self, timeout: Duration) -> Self {
        self.timeout = timeout;
        self
    }

    /// Output dimension of the built-in offline embedder.
    pub fn with_embedding_dim(mut self, dim: usize) -> Self {
        self.builtin_dim = dim;
        self
    }

    pub fn timeout(&self) -> Duration {
        self.timeout
    }

    /// All strategies sorted by (kind, name).
    pub fn list(&self) -> Vec<StrategyDescriptor> {
        let mut out = self.strategies.lock().expect("registry lock").clone();
        out.sort_by(|a, b| (a.kind, &a.name).cmp(&(b.kind, &b.name)));
        out
    }

    pub fn get(&self, kind: StrategyKind, name: &str) -> Result<StrategyDescriptor, RegistryError> {
        self.strategies
            .lock()
            .expect("registry lock")
            .iter()
            .find(|s| s.kind == kind && s.name == name)
            .cloned()
            .ok_or_else(|| RegistryError::UnknownStrategy {
                kind,
                name: name.to_string(),
            })
    }

    pub fn active(&self, kind: StrategyKind) -> Result<StrategyDescriptor, RegistryError> {
        self.strategies
            .lock()
            .expect("registry lock")
            .iter()
            .find(|s| s.kind == kind && s.active)
            .cloned()
            .ok_or(RegistryError::NoActiveStrategy(kind))
    }

    /// Stores a new, inactive strategy. External entrypoints must answer the
    /// handshake with the same kind and a supported contract version.
    pub fn register(&self, descriptor: StrategyDescriptor) -> Result<StrategyDescriptor, RegistryError> {
        let mut descriptor = StrategyDescriptor {
            active: false,
            ..descriptor
        };
        if descriptor.name.trim().is_empty() {
            return Err(RegistryError::InvalidPayload("strategy name is empty".into()));
        }
        self.ensure_new(descriptor.kind, &descriptor.name)?;
        match descriptor.source {
            StrategySource::Builtin => {
                if !is_builtin(descriptor.kind, &descriptor.entrypoint) {
                    return Err(RegistryError::HandshakeFailed(format!(
                        "no built-in {} strategy {}",
                        descriptor.kind, descriptor.entrypoint
                    )));
                }
            }
            StrategySource::External => {
                let path = Path::new(&descriptor.entrypoint);
                if !path.is_file() {
                    return Err(RegistryError::HandshakeFailed(format!("{} is not a file", path.display())));
                }
                let path = path.canonicalize().map_err(|e| RegistryError::HandshakeFailed(e.to_string()))?;
                let probe = PluginProcess::spawn(&path, self.timeout)?;
                let hs = probe.handshake.clone();
                drop(probe);
                if hs.kind != descriptor.kind {
                    return Err(RegistryError::KindMismatch {
                        expected: descriptor.kind,
                        declared: hs.kind,
                    });
                }
                if hs.contract_version != CONTRACT_VERSION {
                    return Err(RegistryError::HandshakeFailed(format!(
                        "contract version {} is not supported (expected {CONTRACT_VERSION})",
                        hs.contract_version
                    )));
                }
                if hs.kind == StrategyKind::Embedding && !matches!(hs.dim, Some(d) if d > 0) {
                    return Err(RegistryError::HandshakeFailed("embedding plugin declared no dimension".into()));
                }
                descriptor.entrypoint = path.display().to_string();
                descriptor.declared_contract_version = hs.contract_version;
                descriptor.declared_dim = hs.dim;
            }
        }
        let mut list = self.strategies.lock().expect("registry lock");
        if list.iter().any(|s| s.kind == descriptor.kind && s.name == descriptor.name) {
            return Err(RegistryError::DuplicateName {
                kind: descriptor.kind,
                name: descriptor.name,
            });
        }
        list.push(descriptor.clone());
        self.persist(&list)?;
        Ok(descriptor)
    }

    fn ensure_new(&self, kind: StrategyKind, name: &str) -> Result<(), RegistryError> {
        match self.get(kind, name) {
            Ok(_) => Err(RegistryError::DuplicateName {
                kind,
                name: name.to_string(),
            }),
            Err(_) => Ok(()),
        }
    }

    /// Makes `name` the only active strategy of its kind.
    pub fn activate(&self, kind: StrategyKind, name: &str) -> Result<StrategyDescriptor, RegistryError> {
        let mut list = self.strategies.lock().expect("registry lock");
        if !list.iter().any(|s| s.kind == kind && s.name == name) {
            return Err(RegistryError::UnknownStrategy {
                kind,
                name: name.to_string(),
            });
        }
        let previous = list.clone();
        for s in list.iter_mut().filter(|s| s.kind == kind) {
            s.active = s.name == name;
        }
        if let Err(e) = self.persist(&list) {
            *list = previous;
            return Err(e);
        }
        Ok(list.iter().find(|s| s.kind == kind && s.name == name).cloned().expect("present"))
    }

    fn save(&self) -> Result<(), RegistryError> {
        let list = self.strategies.lock().expect("registry lock");
        self.persist(&list)
    }

    fn persist(&self, list: &[StrategyDescriptor]) -> Result<(), RegistryError> {
        let Some(path) = &self.path else { return Ok(()) };
        let io = |e: std::io::Error| RegistryError::Io(e.to_string());
        let mut sorted = list.to_vec();
        sorted.sort_by(|a, b| (a.kind, &a.name).cmp(&(b.kind, &b.name)));
        let file = RegistryFile {
            contract_version: CONTRACT_VERSION,
            strategies: sorted,
        };
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent).map_err(io)?;
        }
        let tmp = path.with_extension("json.tmp");
        let mut bytes = serde_json::to_vec_pretty(&file).expect("registry serializes");
        bytes.push(b'\n');
        std::fs::write(&tmp, bytes).map_err(io)?;
        std::fs::rename(&tmp, path).map_err(io)
    }

    /// Routes `payload` to the active strategy of `kind`.
    pub fn invoke(&self, kind: StrategyKind, payload: Value) -> Result<Value, RegistryError> {
        let active = self.active(kind)?;
        self.invoke_named(kind, &active.name, payload)
    }

    pub fn invoke_named(&self, kind: StrategyKind, name: &str, payload: Value) -> Result<Value, RegistryError> {
        fn parse<T: serde::de::DeserializeOwned>(v: Value) -> Result<T, RegistryError> {
            serde_json::from_value(v).map_err(|e| RegistryError::InvalidPayload(e.to_string()))
        }
        let out = match kind {
            StrategyKind::Clustering => serde_json::to_value(self.cluster(name, &parse(payload)?)?),
            StrategyKind::Embedding => serde_json::to_value(self.embed(name, &parse(payload)?)?),
            StrategyKind::Relation => serde_json::to_value(self.relate(name, &parse(payload)?)?),
        };
        Ok(out.expect("response serializes"))
    }

    pub fn cluster(&self, name: &str, req: &ClusterRequest) -> Result<ClusterResponse, RegistryError> {
        let d = self.get(StrategyKind::Clustering, name)?;
        let resp = match d.source {
            StrategySource::Builtin => {
                let vectors: Vec<EmbeddingVector> =
                    req.points.iter().map(|p| EmbeddingVector::from_raw(p.vector.clone())).collect();
                let points: Vec<(&str, &EmbeddingVector)> =
                    req.points.iter().zip(&vectors).map(|(p, v)| (p.id.as_str(), v)).collect();
                let groups = spherical_kmeans(&points, req.c, req.seed, req.max_iters)
                    .map_err(|e| RegistryError::StrategyFailed(e.to_string()))?;
                ClusterResponse {
                    groups: groups
                        .into_iter()
                        .map(|g| g.into_iter().map(|i| req.points[i].id.clone()).collect())
                        .collect(),
                }
            }
            StrategySource::External => self.call_external(&d, req)?,
        };
        let groups = serde_json::to_string(&resp.groups).unwrap_or_default();
        validate_partition(req, resp).inspect_err(|e| {
            tracing::error!(strategy = name, error = %e, payload = %groups, "clustering output rejected");
        })
    }

    pub fn embed(&self, name: &str, req: &EmbedRequest) -> Result<EmbedResponse, RegistryError> {
        let d = self.get(StrategyKind::Embedding, name)?;
        let (resp, dim) = match d.source {
            StrategySource::Builtin => {
                let e = OfflineHashEmbedder::new(self.builtin_dim);
                let vectors = req
                    .texts
                    .iter()
                    .map(|t| e.embed(t).map(|v| v.values().to_vec()))
                    .collect::<Result<_, _>>()
                    .map_err(|e| RegistryError::StrategyFailed(e.to_string()))?;
                (EmbedResponse { vectors }, self.builtin_dim)
            }
            StrategySource::External => (self.call_external(&d, req)?, d.declared_dim.unwrap_or(0)),
        };
        validate_embeddings(req, resp, dim)
    }

    pub fn relate(&self, name: &str, req: &RelateRequest) -> Result<RelateResponse, RegistryError> {
        let d = self.get(StrategyKind::Relation, name)?;
        let resp = match d.source {
            StrategySource::Builtin => cosine_top_m(req),
            StrategySource::External => self.call_external(&d, req)?,
        };
        validate_pairs(req, resp)
    }

    fn call_external<Req: Serialize, Resp: serde::de::DeserializeOwned>(
        &self,
        d: &StrategyDescriptor,
        req: &Req,
    ) -> Result<Resp, RegistryError> {
        let slot = self
            .processes
            .lock()
            .expect("process table lock")
            .entry((d.kind, d.name.clone()))
            .or_default()
            .clone();
        let mut guard = slot.lock().expect("plugin lock");
        if guard.is_none() {
            let process = PluginProcess::spawn(Path::new(&d.entrypoint), self.timeout)?;
            if process.handshake.kind != d.kind {
                return Err(RegistryError::KindMismatch {
                    expected: d.kind,
                    declared: process.handshake.kind,
                });
            }
            *guard = Some(process);
        }
        let payload = serde_json::to_value(req).expect("request serializes");
        let result = guard
            .as_mut()
            .expect("spawned")
            .call(d.kind.operation(), payload, self.timeout);
        let value = match result {
            Ok(v) => v,
            Err(e) => {
                if !matches!(e, RegistryError::StrategyFailed(_)) {
                    // the process is in an unknown state; start fresh next time
                    *guard = None;
                }
                return Err(e);
            }
        };
        serde_json::from_value(value).map_err(|e| RegistryError::ContractViolation(format!("malformed {} payload: {e}", d.kind)))
    }
}

fn check_active(list: &[StrategyDescriptor]) -> Result<(), RegistryError> {
    let mut active: BTreeMap<StrategyKind, usize> = BTreeMap::new();
    let mut names = std::collections::BTreeSet::new();
    for s in list {
        if !names.insert((s.kind, s.name.as_str())) {
            return Err(RegistryError::Corrupt(format!("duplicate {} strategy {}", s.kind, s.name)));
        }
        *active.entry(s.kind).or_default() += usize::from(s.active);
    }
    for kind in StrategyKind::ALL {
        let n = active.get(&kind).copied().unwrap_or(0);
        if n != 1 {
            return Err(RegistryError::Corrupt(format!("{n} active {kind} strategies")));
        }
    }
    Ok(())
}

/// Cosine of the node against every candidate; the best `m` at or above the
/// threshold, ties by id.
pub fn cosine_top_m(req: &RelateRequest) -> RelateResponse {
    let node = EmbeddingVector::from_raw(req.node.vector.clone());
    let mut scored: Vec<ScoredPair> = req
        .candidates
        .iter()
        .map(|c| ScoredPair {
            id: c.id.clone(),
            score: node.dot(&EmbeddingVector::from_raw(c.vector.clone())).clamp(-1.0, 1.0),
        })
        .collect();
    scored.sort_by(|a, b| b.score.total_cmp(&a.score).then_with(|| a.id.cmp(&b.id)));
    scored.truncate(req.m);
    scored.retain(|p| p.score >= req.threshold);
    RelateResponse { pairs: scored }
}

#[cfg(test)]
mod tests;
