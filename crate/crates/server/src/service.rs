//! The catalog service: one data directory, one process, at most one build.

use std::collections::{BTreeSet, HashMap};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, RwLock};
use std::time::Duration;

use chrono::Utc;

use lakescope_core::config::LakescopeConfig;
use lakescope_core::embed::{Embedder, EmbedderDescriptor, EmbedderKind, OfflineHashEmbedder, RemoteEmbedder};
use lakescope_core::gateway::{GatewayError, ModelGateway, ProviderConfig, TemplateSet};
use lakescope_core::hierarchy::{
    build_hierarchy, leaf_nodes, BuildServices, CatalogNode, Forest, HierarchyConfig, HierarchyError, TABLE_LEVEL,
};
use lakescope_core::index::VectorIndex;
use lakescope_core::ingest::{parse_ddl, CatalogPage, CatalogQuery, IngestError, ParseOptions, PhysicalCatalog, SidecarMetadata, ValueSketch};
use lakescope_core::profile::ProfileSet;
use lakescope_core::registry::{
    Registry, StrategyClusterer, StrategyDescriptor, StrategyEmbedder, StrategyKind, StrategyRelationScorer,
    StrategySource, DEFAULT_PLUGIN_TIMEOUT,
};
use lakescope_core::relation::{analyze_expansion, ExpansionContext, RelationCache, RelationScorer, RelationServices};
use lakescope_core::search::{build_index, search, SearchRequest, SearchServices};

use crate::error::ServiceError;
use crate::jobs::{BuildJob, JobState, Jobs};
use crate::store::{BuiltWith, ForestVersion, Store};
use crate::views::*;

pub const PLUGIN_TIMEOUT_ENV: &str = "LAKESCOPE_PLUGIN_TIMEOUT_SECS";

#[derive(Debug, Clone, Default)]
pub struct ServiceOptions {
    pub data_dir: PathBuf,
    /// Force offline completion and embedding providers.
    pub offline: bool,
    pub k: Option<usize>,
    pub seed: Option<u64>,
}

impl ServiceOptions {
    pub fn new(data_dir: impl Into<PathBuf>) -> Self {
        Self {
            data_dir: data_dir.into(),
            ..Self::default()
        }
    }

    pub fn offline(mut self) -> Self {
        self.offline = true;
        self
    }
}

/// A committed forest version with everything needed to answer reads.
pub struct Snapshot {
    pub record: ForestVersion,
    pub forest: Forest,
    pub index: VectorIndex,
    relations: Mutex<HashMap<String, Arc<RelationCache>>>,
}

impl Snapshot {
    fn new(record: ForestVersion, forest: Forest, index: VectorIndex) -> Self {
        Self {
            record,
            forest,
            index,
            relations: Mutex::new(HashMap::new()),
        }
    }

    pub fn version(&self) -> u64 {
        self.record.version
    }
}

pub struct Service {
    store: Store,
    jobs: Jobs,
    options: ServiceOptions,
    config: LakescopeConfig,
    gateway: ModelGateway,
    registry: Arc<Registry>,
    catalog: RwLock<Arc<PhysicalCatalog>>,
    snapshot: RwLock<Option<Arc<Snapshot>>>,
    /// Job id of the build running in this process.
    build_slot: Mutex<Option<String>>,
    catalog_writer: Mutex<()>,
}

fn ingest_error(e: IngestError) -> ServiceError {
    match e {
        IngestError::SourceConflict { .. } => ServiceError::Conflict(e.to_string()),
        IngestError::UnknownColumn(c) => ServiceError::NotFound(format!("column {c}")),
        e => ServiceError::InvalidInput(e.to_string()),
    }
}

fn gateway_error(e: GatewayError) -> ServiceError {
    ServiceError::ProviderUnavailable(e.to_string())
}

fn plugin_timeout() -> Result<Duration, ServiceError> {
    match std::env::var(PLUGIN_TIMEOUT_ENV) {
        Ok(v) => v
            .trim()
            .parse::<f64>()
            .ok()
            .filter(|s| *s > 0.0 && s.is_finite())
            .map(Duration::from_secs_f64)
            .ok_or_else(|| ServiceError::InvalidInput(format!("{PLUGIN_TIMEOUT_ENV} must be a positive number"))),
        Err(_) => Ok(DEFAULT_PLUGIN_TIMEOUT),
    }
}

fn valid_source_name(name: &str) -> bool {
    !name.is_empty() && !name.contains('.') && !name.chars().any(char::is_whitespace)
}

impl Service {
    pub fn open(options: ServiceOptions) -> Result<Arc<Self>, ServiceError> {
        let store = Store::open(&options.data_dir)?;
        let mut config = LakescopeConfig::load_or_default(&store.config_path())
            .map_err(|e| ServiceError::InvalidInput(format!("{}: {e}", store.config_path().display())))?;
        if let Some(k) = options.k {
            config.hierarchy.k = k;
        }
        if let Some(seed) = options.seed {
            config.hierarchy.seed = seed;
        }
        config.validate().map_err(|e| ServiceError::InvalidInput(e.to_string()))?;

        let templates = if store.prompts_dir().is_dir() {
            TemplateSet::load_dir(&store.prompts_dir()).map_err(|e| ServiceError::InvalidInput(e.to_string()))?
        } else {
            TemplateSet::builtin()
        };
        let gateway = ModelGateway::new(ProviderConfig::from_env(options.offline), templates)
            .and_then(|g| g.persist_to(&store.llm_dir()))
            .map_err(gateway_error)?;
        let registry = Registry::open(&store.strategies_path())?
            .with_timeout(plugin_timeout()?)
            .with_embedding_dim(config.embedder.dim);

        let catalog = store.load_catalog()?;
        let jobs = Jobs::new(&store.jobs_dir());
        jobs.recover_stale()?;
        let snapshot = match store.current_version()? {
            Some(v) => {
                let (record, forest, index) = store.load_forest(v)?;
                Some(Arc::new(Snapshot::new(record, forest, index)))
            }
            None => None,
        };
        Ok(Arc::new(Self {
            store,
            jobs,
            options,
            config,
            gateway,
            registry: Arc::new(registry),
            catalog: RwLock::new(Arc::new(catalog)),
            snapshot: RwLock::new(snapshot),
            build_slot: Mutex::new(None),
            catalog_writer: Mutex::new(()),
        }))
    }

    pub fn config(&self) -> &LakescopeConfig {
        &self.config
    }

    pub fn data_dir(&self) -> &Path {
        self.store.root()
    }

    pub fn registry(&self) -> &Arc<Registry> {
        &self.registry
    }

    pub fn gateway(&self) -> &ModelGateway {
        &self.gateway
    }

    pub fn catalog(&self) -> Arc<PhysicalCatalog> {
        self.catalog.read().expect("catalog lock").clone()
    }

    pub fn snapshot(&self) -> Result<Arc<Snapshot>, ServiceError> {
        self.snapshot.read().expect("snapshot lock").clone().ok_or(ServiceError::NoForest)
    }

    fn counts(&self) -> CatalogCounts {
        let (sources, tables, columns) = self.catalog().counts();
        CatalogCounts { sources, tables, columns }
    }

    pub fn health(&self) -> Result<Health, ServiceError> {
        let snapshot = self.snapshot.read().expect("snapshot lock").clone();
        let running = self.build_slot.lock().expect("build slot").clone();
        let running = match running {
            Some(id) => Some(id),
            None => self.jobs.running_elsewhere()?.map(|j| j.job_id),
        };
        Ok(Health {
            status: "ok".into(),
            forest_version: snapshot.as_ref().map(|s| s.version()),
            catalog: self.counts(),
            forest_nodes: snapshot.as_ref().map_or(0, |s| s.forest.len()),
            running_job: running,
            provider: self.gateway.provider_kind(),
            embedder: snapshot.map(|s| s.record.built_with.embedder.clone()),
        })
    }

    // ---- ingestion ----

    /// Parses and adds every source, then persists the catalog once.
    /// Nothing is stored if any source fails.
    pub fn ingest(&self, requests: Vec<IngestRequest>) -> Result<IngestResponse, ServiceError> {
        if requests.is_empty() {
            return Err(ServiceError::InvalidInput("no sources given".into()));
        }
        let _writer = self.catalog_writer.lock().expect("catalog writer");
        let mut catalog = (*self.catalog()).clone();
        let now = Utc::now();
        let mut summaries = Vec::with_capacity(requests.len());
        for req in requests {
            if !valid_source_name(&req.name) {
                return Err(ServiceError::InvalidInput(format!(
                    "source name {:?} must be non-empty without dots or whitespace",
                    req.name
                )));
            }
            let origin = req.origin.clone().unwrap_or_else(|| format!("inline:{}", req.name));
            let parsed = parse_ddl(req.ddl.as_bytes(), &req.name, &ParseOptions::new(origin).ingested_at(now))
                .map_err(|e| ServiceError::InvalidInput(format!("source {}: {e}", req.name)))?;
            let sidecar = req
                .sidecar
                .as_deref()
                .map(SidecarMetadata::parse)
                .transpose()
                .map_err(|e| ServiceError::InvalidInput(format!("sidecar of {}: {e}", req.name)))?;
            summaries.push(catalog.add_source(parsed, sidecar).map_err(ingest_error)?);
        }
        self.store.save_catalog(&catalog)?;
        *self.catalog.write().expect("catalog lock") = Arc::new(catalog);
        Ok(IngestResponse {
            sources: summaries,
            catalog: self.counts(),
        })
    }

    pub fn ingest_values(&self, req: ValuesRequest) -> Result<ValueSketch, ServiceError> {
        let _writer = self.catalog_writer.lock().expect("catalog writer");
        let mut catalog = (*self.catalog()).clone();
        let column_id = catalog
            .resolve_column_path(&req.column_path)
            .map(|c| c.column_id.clone())
            .ok_or_else(|| ServiceError::NotFound(format!("column {}", req.column_path)))?;
        let sketch = catalog.ingest_value_data(&column_id, req.values).map_err(ingest_error)?;
        self.store.save_catalog(&catalog)?;
        *self.catalog.write().expect("catalog lock") = Arc::new(catalog);
        Ok(sketch)
    }

    pub fn list_sources(&self) -> SourceList {
        let catalog = self.catalog();
        let sources = catalog
            .sources()
            .map(|s| {
                let tables: Vec<_> = catalog.tables().filter(|t| t.source_id == s.source_id).collect();
                SourceView {
                    source: s.clone(),
                    origin_kind: s.origin_kind().to_string(),
                    tables: tables.len(),
                    columns: tables.iter().map(|t| t.columns.len()).sum(),
                    diagnostics: catalog.diagnostics(&s.source_id).len(),
                }
            })
            .collect();
        SourceList { sources }
    }

    pub fn list_catalog(&self, query: &CatalogQuery) -> Result<CatalogPage, ServiceError> {
        self.catalog().list_catalog(query).map_err(ingest_error)
    }

    // ---- builds ----

    /// Validates the request and records a pending job that owns the build
    /// slot until `run_build` finishes.
    fn prepare_build(&self, req: &BuildRequest) -> Result<BuildJob, ServiceError> {
        let mut slot = self.build_slot.lock().expect("build slot");
        if let Some(id) = slot.as_ref() {
            return Err(ServiceError::BuildInProgress(id.clone()));
        }
        if let Some(job) = self.jobs.running_elsewhere()? {
            return Err(ServiceError::BuildInProgress(format!("{} in process {}", job.job_id, job.pid)));
        }
        if self.catalog().is_empty() {
            return Err(ServiceError::InvalidInput("the catalog is empty; ingest sources first".into()));
        }
        let mut config: HierarchyConfig = self.config.hierarchy.clone();
        if let Some(k) = req.k {
            config.k = k;
        }
        if let Some(seed) = req.seed {
            config.seed = seed;
        }
        config.clustering_strategy = self.registry.active(StrategyKind::Clustering)?.name;
        config.validate()?;

        let resumed_from = match req.resume.as_deref() {
            None => None,
            Some(which) => {
                let job = if which == "latest" {
                    self.jobs
                        .list()?
                        .into_iter()
                        .rev()
                        .find(BuildJob::is_resumable)
                        .ok_or_else(|| ServiceError::NotFound("resumable job".into()))?
                } else {
                    self.jobs.load(which)?
                };
                if !job.is_resumable() {
                    return Err(ServiceError::Conflict(format!(
                        "job {} is {:?}; only failed jobs can be resumed",
                        job.job_id, job.state
                    )));
                }
                if job.config != config {
                    return Err(ServiceError::Conflict(format!(
                        "job {} was built with a different hierarchy config; resume needs the same K, B, seed and clustering strategy",
                        job.job_id
                    )));
                }
                Some(job.job_id)
            }
        };
        let job = self.jobs.create(config, resumed_from)?;
        *slot = Some(job.job_id.clone());
        Ok(job)
    }

    /// Starts a build on a background thread and returns the pending job.
    pub fn start_build(self: &Arc<Self>, req: BuildRequest) -> Result<BuildJob, ServiceError> {
        let job = self.prepare_build(&req)?;
        let svc = Arc::clone(self);
        let id = job.job_id.clone();
        std::thread::Builder::new()
            .name(format!("build-{id}"))
            .spawn(move || {
                if let Err(e) = svc.run_build(&id) {
                    tracing::error!(job = %id, error = %e, "build failed");
                }
            })
            .map_err(|e| ServiceError::io("build thread", e))?;
        Ok(job)
    }

    /// Runs a build to completion on the calling thread.
    pub fn build(&self, req: BuildRequest) -> Result<BuildJob, ServiceError> {
        let job = self.prepare_build(&req)?;
        self.run_build(&job.job_id)
    }

    fn run_build(&self, id: &str) -> Result<BuildJob, ServiceError> {
        let result = self.jobs.load(id).and_then(|mut job| {
            let outcome = self.execute_build(&mut job);
            if let Err(e) = &outcome {
                if job.state != JobState::Failed {
                    let _ = job.transition(JobState::Failed);
                }
                job.error = Some(e.to_string());
                job.error_code = Some(e.code().to_string());
                self.jobs.save(&job)?;
            }
            outcome.map(|_| job)
        });
        *self.build_slot.lock().expect("build slot") = None;
        result
    }

    fn build_embedder(&self) -> Result<(Box<dyn Embedder>, String), ServiceError> {
        let active = self.registry.active(StrategyKind::Embedding)?;
        let embedder: Box<dyn Embedder> = match active.source {
            StrategySource::Builtin => {
                let remote = if self.options.offline {
                    None
                } else {
                    RemoteEmbedder::from_env(ProviderConfig::from_env(false))
                };
                match remote {
                    Some(r) => Box::new(r.map_err(|e| ServiceError::ProviderUnavailable(e.to_string()))?),
                    None => Box::new(OfflineHashEmbedder::new(self.config.embedder.dim)),
                }
            }
            StrategySource::External => Box::new(StrategyEmbedder::new(Arc::clone(&self.registry), &active.name)?),
        };
        Ok((embedder, active.name))
    }

    /// The embedder a forest was built with, for embedding queries.
    fn query_embedder(&self, snapshot: &Snapshot) -> Result<Box<dyn Embedder>, ServiceError> {
        let built: &EmbedderDescriptor = &snapshot.record.built_with.embedder;
        let embedder: Box<dyn Embedder> = match built.kind {
            EmbedderKind::OfflineHash => Box::new(OfflineHashEmbedder::new(built.dim)),
            EmbedderKind::Remote => {
                if self.options.offline {
                    return Err(ServiceError::ProviderUnavailable(format!(
                        "forest v{} was built with remote embedder {}; rebuild to query offline",
                        snapshot.version(),
                        built.name
                    )));
                }
                let remote = RemoteEmbedder::from_env(ProviderConfig::from_env(false))
                    .ok_or_else(|| ServiceError::ProviderUnavailable("no embedding endpoint configured".into()))?
                    .map_err(|e| ServiceError::ProviderUnavailable(e.to_string()))?;
                Box::new(remote)
            }
            EmbedderKind::External => Box::new(StrategyEmbedder::new(
                Arc::clone(&self.registry),
                &snapshot.record.built_with.embedding_strategy,
            )?),
        };
        if embedder.descriptor() != built {
            return Err(ServiceError::Conflict(format!(
                "forest v{} needs embedder {} (dim {}), configured is {} (dim {})",
                snapshot.version(),
                built.name,
                built.dim,
                embedder.descriptor().name,
                embedder.descriptor().dim
            )));
        }
        Ok(embedder)
    }

    fn execute_build(&self, job: &mut BuildJob) -> Result<(), ServiceError> {
        job.transition(JobState::Running)?;
        self.jobs.save(job)?;
        let catalog = self.catalog();

        let previous = self.store.load_profiles();
        let profiles = ProfileSet::build(&catalog, &self.gateway, previous.as_ref());
        self.store.save_profiles(&profiles)?;
        if let Some((id, e)) = profiles.failures.first() {
            return Err(ServiceError::ProviderUnavailable(format!(
                "{} node(s) could not be profiled; first: {id}: {e}",
                profiles.failures.len()
            )));
        }

        let (embedder, embedding_strategy) = self.build_embedder()?;
        let leaves = leaf_nodes(&catalog, &profiles, embedder.as_ref())?;
        let tables = leaves.iter().filter(|n| n.level == TABLE_LEVEL).count();
        job.frontier_size = tables;
        job.frontier_sizes = vec![tables];
        self.jobs.save(job)?;

        let resume = match &job.resumed_from {
            Some(from) => {
                let layers = self.jobs.read_layers(from)?;
                for layer in &layers {
                    if let Some(level) = layer.first().map(|n| n.level) {
                        self.jobs.write_layer(&job.job_id, level, layer)?;
                    }
                }
                layers
            }
            None => Vec::new(),
        };

        let clusterer = StrategyClusterer::new(Arc::clone(&self.registry), &job.config.clustering_strategy)?;
        let services = BuildServices {
            clusterer: &clusterer,
            gateway: &self.gateway,
            embedder: embedder.as_ref(),
        };
        let mut computed = 0usize;
        let config = job.config.clone();
        let forest = {
            let jobs = &self.jobs;
            let mut sink = |level: u32, nodes: &[CatalogNode]| -> Result<(), HierarchyError> {
                let fail = |e: ServiceError| HierarchyError::Io(std::io::Error::other(e.to_string()));
                jobs.write_layer(&job.job_id, level, nodes).map_err(fail)?;
                computed += 1;
                job.current_layer = level;
                job.frontier_size = nodes.len();
                job.frontier_sizes.push(nodes.len());
                jobs.save(job).map_err(fail)
            };
            build_hierarchy(leaves, &config, &services, &resume, &mut sink)?
        };

        let category_layers = forest.top_level().saturating_sub(TABLE_LEVEL) as usize;
        job.layers_reused = category_layers.saturating_sub(computed);
        job.frontier_sizes = forest.meta().layer_sizes[TABLE_LEVEL as usize..].to_vec();
        job.frontier_size = job.frontier_sizes.last().copied().unwrap_or(0);
        job.current_layer = forest.top_level();

        let index = build_index(&forest, embedder.descriptor().clone())
            .map_err(|e| ServiceError::Internal(format!("index: {e}")))?;
        let record = ForestVersion {
            version: self.store.next_version()?,
            built_with: BuiltWith {
                hierarchy: job.config.clone(),
                clustering_strategy: job.config.clustering_strategy.clone(),
                embedding_strategy,
                relation_strategy: self.registry.active(StrategyKind::Relation)?.name,
                embedder: embedder.descriptor().clone(),
                prompt_versions: self
                    .gateway
                    .templates()
                    .versions()
                    .into_iter()
                    .map(|(id, v)| (id.as_str().to_string(), v))
                    .collect(),
            },
            job_id: job.job_id.clone(),
            created_at: Utc::now(),
        };
        self.store.commit_forest(&record, &forest, &index)?;
        let version = record.version;
        *self.snapshot.write().expect("snapshot lock") = Some(Arc::new(Snapshot::new(record, forest, index)));

        job.forest_version = Some(version);
        job.transition(JobState::Done)?;
        self.jobs.save(job)?;
        tracing::info!(job = %job.job_id, version, layers_reused = job.layers_reused, "forest committed");
        Ok(())
    }

    pub fn job(&self, id: &str) -> Result<BuildJob, ServiceError> {
        self.jobs.load(id)
    }

    pub fn list_jobs(&self) -> Result<JobList, ServiceError> {
        Ok(JobList { jobs: self.jobs.list()? })
    }

    // ---- reads ----

    pub fn root(&self) -> Result<RootResponse, ServiceError> {
        let snap = self.snapshot()?;
        Ok(RootResponse {
            forest_version: snap.version(),
            nodes: snap.forest.roots().into_iter().map(NodeView::from).collect(),
        })
    }

    pub fn node(&self, id: &str) -> Result<NodeResponse, ServiceError> {
        let snap = self.snapshot()?;
        let node = snap.forest.node(id).ok_or_else(|| ServiceError::NotFound(format!("node {id}")))?;
        Ok(NodeResponse {
            forest_version: snap.version(),
            node: node.into(),
            children: snap.forest.children_of(id)?.into_iter().map(NodeView::from).collect(),
            ancestors: snap.forest.ancestors(id).into_iter().map(NodeView::from).collect(),
        })
    }

    fn relation_cache(&self, snap: &Snapshot, strategy: &str) -> Result<Arc<RelationCache>, ServiceError> {
        let mut caches = snap.relations.lock().expect("relation caches");
        if let Some(c) = caches.get(strategy) {
            return Ok(Arc::clone(c));
        }
        let dir = self.store.relations_dir(strategy);
        std::fs::create_dir_all(&dir).map_err(|e| ServiceError::io("relations", e))?;
        let cache = Arc::new(RelationCache::open(&dir, snap.version())?);
        caches.insert(strategy.to_string(), Arc::clone(&cache));
        Ok(cache)
    }

    pub fn expand(&self, id: &str, req: ExpandRequest) -> Result<ExpandResponse, ServiceError> {
        let snap = self.snapshot()?;
        let forest = &snap.forest;
        let node = forest.node(id).ok_or_else(|| ServiceError::NotFound(format!("node {id}")))?;
        let children = forest.children_of(id)?;
        let child_ids: BTreeSet<&str> = children.iter().map(|c| c.node_id.as_str()).collect();

        let visible: Vec<String> = match req.visible_nodes {
            Some(v) => v,
            None => {
                let mut v: BTreeSet<String> = forest.roots().iter().map(|r| r.node_id.clone()).collect();
                v.insert(node.node_id.clone());
                for a in forest.ancestors(id) {
                    v.extend(a.children.iter().cloned());
                }
                v.into_iter().collect()
            }
        };
        let mut seen = BTreeSet::new();
        let visible: Vec<String> = visible
            .into_iter()
            .filter(|v| !child_ids.contains(v.as_str()) && seen.insert(v.clone()))
            .collect();

        let m = req.m.unwrap_or(self.config.relations.m);
        let threshold = req.threshold.unwrap_or(self.config.relations.threshold);
        if !(-1.0..=1.0).contains(&threshold) {
            return Err(ServiceError::InvalidInput("threshold must lie in [-1, 1]".into()));
        }

        let strategy = self.registry.active(StrategyKind::Relation)?;
        let external = match strategy.source {
            StrategySource::Builtin => None,
            StrategySource::External => Some(StrategyRelationScorer::new(Arc::clone(&self.registry), &strategy.name)?),
        };
        let cache = self.relation_cache(&snap, &strategy.name)?;
        let catalog = self.catalog();
        let ctx = ExpansionContext {
            m,
            threshold,
            ..ExpansionContext::new(id, child_ids.iter().map(|s| s.to_string()).collect(), visible)
        };
        let services = RelationServices {
            forest,
            catalog: &catalog,
            gateway: &self.gateway,
            cache: &cache,
            scorer: external.as_ref().map(|s| s as &dyn RelationScorer),
        };
        let result = analyze_expansion(&ctx, &services)?;
        Ok(ExpandResponse {
            forest_version: snap.version(),
            node: node.into(),
            children: children.into_iter().map(NodeView::from).collect(),
            edges: result.edges,
            degraded: result.degraded,
        })
    }

    pub fn search_request(&self, body: SearchBody) -> SearchRequest {
        SearchRequest {
            query_text: body.query_text,
            n: body.n.unwrap_or(self.config.search.default_n),
            mode: body.mode.unwrap_or_default(),
            kind_filter: body.kind_filter,
            include_categories: body.include_categories.unwrap_or(self.config.search.include_categories),
        }
    }

    pub fn search(&self, body: SearchBody) -> Result<SearchResult, ServiceError> {
        let request = self.search_request(body);
        let snap = self.snapshot()?;
        let embedder = self.query_embedder(&snap)?;
        let clusterer = StrategyClusterer::new(Arc::clone(&self.registry), &snap.record.built_with.clustering_strategy)?;
        let services = SearchServices {
            gateway: &self.gateway,
            embedder: embedder.as_ref(),
            index: &snap.index,
            forest: &snap.forest,
            clusterer: &clusterer,
            hierarchy_config: &snap.record.built_with.hierarchy,
            example_query: &self.config.search.example_query,
        };
        let response = search(&request, &services)?;
        let hit_nodes = response
            .hits
            .iter()
            .map(|h| {
                snap.forest
                    .node(&h.node_id)
                    .map(NodeView::from)
                    .ok_or_else(|| ServiceError::Internal(format!("hit {} is not in the forest", h.node_id)))
            })
            .collect::<Result<_, _>>()?;
        Ok(SearchResult {
            forest_version: snap.version(),
            response,
            hit_nodes,
        })
    }

    // ---- strategies ----

    pub fn list_strategies(&self) -> StrategyList {
        StrategyList {
            strategies: self.registry.list(),
        }
    }

    pub fn register_strategy(&self, req: StrategyRegistration) -> Result<StrategyDescriptor, ServiceError> {
        let descriptor = match (&req.exec, &req.builtin) {
            (Some(path), None) => StrategyDescriptor::external(req.kind, &req.name, path),
            (None, Some(id)) => StrategyDescriptor {
                name: req.name.clone(),
                ..StrategyDescriptor::builtin(req.kind, id)
            },
            _ => {
                return Err(ServiceError::InvalidInput(
                    "give exactly one of exec (plugin path) or builtin (builtin id)".into(),
                ))
            }
        };
        if req.name.trim().is_empty() || req.name.contains(['/', '\\']) {
            return Err(ServiceError::InvalidInput(format!("invalid strategy name {:?}", req.name)));
        }
        let registered = self.registry.register(descriptor)?;
        if req.activate {
            return Ok(self.registry.activate(req.kind, &registered.name)?);
        }
        Ok(registered)
    }

    pub fn activate_strategy(&self, kind: &str, name: &str) -> Result<StrategyDescriptor, ServiceError> {
        let kind = StrategyKind::parse(kind)
            .ok_or_else(|| ServiceError::InvalidInput(format!("unknown strategy kind {kind:?}")))?;
        Ok(self.registry.activate(kind, name)?)
    }
}
