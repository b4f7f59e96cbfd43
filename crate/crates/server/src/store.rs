//! Data directory layout.
//!
//! ```text
//! <data>/catalog/            physical catalog record files
//! <data>/profiles/           column and table profiles
//! <data>/llm/                completion cache and audit log
//! <data>/forests/vN/         nodes.jsonl, forest.json, index.lsvi, version.json
//! <data>/forests/CURRENT     committed version number
//! <data>/jobs/<id>/          job.json and layer-<level>.jsonl
//! <data>/relations/<strategy>/vN.jsonl
//! <data>/strategies.json
//! <data>/lakescope.toml      optional config overrides
//! ```
//!
//! A build becomes visible only when `CURRENT` is replaced, so a crash at
//! any earlier point leaves the previous version intact.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use lakescope_core::embed::EmbedderDescriptor;
use lakescope_core::hierarchy::{Forest, HierarchyConfig};
use lakescope_core::index::VectorIndex;
use lakescope_core::ingest::PhysicalCatalog;
use lakescope_core::profile::ProfileSet;
use lakescope_core::search::build_index;

use crate::error::ServiceError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BuiltWith {
    pub hierarchy: HierarchyConfig,
    pub clustering_strategy: String,
    pub embedding_strategy: String,
    pub relation_strategy: String,
    pub embedder: EmbedderDescriptor,
    pub prompt_versions: BTreeMap<String, u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestVersion {
    pub version: u64,
    pub built_with: BuiltWith,
    pub job_id: String,
    pub created_at: DateTime<Utc>,
}

#[derive(Debug, Clone)]
pub struct Store {
    root: PathBuf,
}

pub fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    let tmp = path.with_extension(format!("tmp{}", std::process::id()));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(tmp, path)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> std::io::Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    write_atomic(path, &bytes)
}

fn io(context: &Path, e: impl std::fmt::Display) -> ServiceError {
    ServiceError::io(&context.display().to_string(), e)
}

impl Store {
    pub fn open(root: &Path) -> Result<Self, ServiceError> {
        let store = Self { root: root.to_path_buf() };
        for dir in [store.catalog_dir(), store.forests_dir(), store.jobs_dir()] {
            fs::create_dir_all(&dir).map_err(|e| io(&dir, e))?;
        }
        // half-written versions from an interrupted commit
        for entry in fs::read_dir(store.forests_dir()).map_err(|e| io(root, e))?.flatten() {
            if entry.file_name().to_string_lossy().starts_with(".tmp-") {
                let _ = fs::remove_dir_all(entry.path());
            }
        }
        Ok(store)
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn catalog_dir(&self) -> PathBuf {
        self.root.join("catalog")
    }

    pub fn profiles_dir(&self) -> PathBuf {
        self.root.join("profiles")
    }

    pub fn llm_dir(&self) -> PathBuf {
        self.root.join("llm")
    }

    pub fn forests_dir(&self) -> PathBuf {
        self.root.join("forests")
    }

    pub fn forest_dir(&self, version: u64) -> PathBuf {
        self.forests_dir().join(format!("v{version}"))
    }

    pub fn jobs_dir(&self) -> PathBuf {
        self.root.join("jobs")
    }

    pub fn relations_dir(&self, strategy: &str) -> PathBuf {
        self.root.join("relations").join(strategy)
    }

    pub fn strategies_path(&self) -> PathBuf {
        self.root.join("strategies.json")
    }

    pub fn config_path(&self) -> PathBuf {
        self.root.join("lakescope.toml")
    }

    pub fn prompts_dir(&self) -> PathBuf {
        self.root.join("prompts")
    }

    pub fn load_catalog(&self) -> Result<PhysicalCatalog, ServiceError> {
        PhysicalCatalog::load(&self.catalog_dir()).map_err(|e| ServiceError::CorruptStore(format!("catalog: {e}")))
    }

    pub fn save_catalog(&self, catalog: &PhysicalCatalog) -> Result<(), ServiceError> {
        catalog.save(&self.catalog_dir()).map_err(|e| io(&self.catalog_dir(), e))
    }

    pub fn load_profiles(&self) -> Option<ProfileSet> {
        let dir = self.profiles_dir();
        if !dir.exists() {
            return None;
        }
        match ProfileSet::load(&dir) {
            Ok(p) => Some(p),
            Err(e) => {
                tracing::warn!(error = %e, "stored profiles unreadable, recomputing");
                None
            }
        }
    }

    pub fn save_profiles(&self, profiles: &ProfileSet) -> Result<(), ServiceError> {
        profiles.save(&self.profiles_dir()).map_err(|e| io(&self.profiles_dir(), e))
    }

    pub fn current_version(&self) -> Result<Option<u64>, ServiceError> {
        let path = self.forests_dir().join("CURRENT");
        match fs::read_to_string(&path) {
            Ok(text) => text
                .trim()
                .parse()
                .map(Some)
                .map_err(|_| ServiceError::CorruptStore(format!("{} holds {:?}", path.display(), text.trim()))),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(io(&path, e)),
        }
    }

    /// One past the largest version present on disk.
    pub fn next_version(&self) -> Result<u64, ServiceError> {
        let mut max = self.current_version()?.unwrap_or(0);
        for entry in fs::read_dir(self.forests_dir()).map_err(|e| io(&self.forests_dir(), e))?.flatten() {
            let name = entry.file_name().to_string_lossy().to_string();
            if let Some(v) = name.strip_prefix('v').and_then(|n| n.parse::<u64>().ok()) {
                max = max.max(v);
            }
        }
        Ok(max + 1)
    }

    /// Writes the version directory, then switches `CURRENT` to it.
    pub fn commit_forest(&self, record: &ForestVersion, forest: &Forest, index: &VectorIndex) -> Result<(), ServiceError> {
        let tmp = self.forests_dir().join(format!(".tmp-v{}-{}", record.version, std::process::id()));
        let _ = fs::remove_dir_all(&tmp);
        forest.save(&tmp).map_err(|e| io(&tmp, e))?;
        index.save(&tmp.join("index.lsvi")).map_err(|e| io(&tmp, e))?;
        write_json(&tmp.join("version.json"), record).map_err(|e| io(&tmp, e))?;
        let dir = self.forest_dir(record.version);
        if dir.exists() {
            fs::remove_dir_all(&dir).map_err(|e| io(&dir, e))?;
        }
        fs::rename(&tmp, &dir).map_err(|e| io(&dir, e))?;
        write_atomic(&self.forests_dir().join("CURRENT"), format!("{}\n", record.version).as_bytes())
            .map_err(|e| io(&self.forests_dir(), e))
    }

    pub fn load_forest(&self, version: u64) -> Result<(ForestVersion, Forest, VectorIndex), ServiceError> {
        let dir = self.forest_dir(version);
        let corrupt = |what: &str, e: &dyn std::fmt::Display| ServiceError::CorruptStore(format!("forest v{version} {what}: {e}"));
        let record: ForestVersion = fs::read(dir.join("version.json"))
            .map_err(|e| corrupt("version.json", &e))
            .and_then(|b| serde_json::from_slice(&b).map_err(|e| corrupt("version.json", &e)))?;
        let forest = Forest::load(&dir).map_err(|e| corrupt("nodes", &e))?;
        let index = match VectorIndex::load(&dir.join("index.lsvi")) {
            Ok(index) if index.len() == forest.len() => index,
            other => {
                if let Err(e) = other {
                    tracing::warn!(version, error = %e, "index file unusable, rebuilding from the forest");
                }
                let index = build_index(&forest, forest.meta().embedder.clone()).map_err(|e| corrupt("index", &e))?;
                if let Err(e) = index.save(&dir.join("index.lsvi")) {
                    tracing::warn!(version, error = %e, "could not rewrite index file");
                }
                index
            }
        };
        Ok((record, forest, index))
    }
}
