//! Request and response payloads shared by the HTTP API and the CLI.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use lakescope_core::embed::EmbedderDescriptor;
use lakescope_core::gateway::ProviderKind;
use lakescope_core::hierarchy::CatalogNode;
use lakescope_core::index::NodeKind;
use lakescope_core::ingest::{IngestSummary, SourceRecord};
use lakescope_core::registry::{StrategyDescriptor, StrategyKind};
use lakescope_core::relation::RelationEdge;
use lakescope_core::search::{SearchMode, SearchResponse};

use crate::jobs::BuildJob;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeView {
    pub node_id: String,
    pub kind: NodeKind,
    pub label: String,
    pub summary_text: String,
    pub level: u32,
    pub parent: Option<String>,
    pub child_count: usize,
    pub member_leaf_count: u64,
}

impl From<&CatalogNode> for NodeView {
    fn from(n: &CatalogNode) -> Self {
        Self {
            node_id: n.node_id.clone(),
            kind: n.kind,
            label: n.label.clone(),
            summary_text: n.summary_text.clone(),
            level: n.level,
            parent: n.parent.clone(),
            child_count: n.children.len(),
            member_leaf_count: n.member_leaf_count,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CatalogCounts {
    pub sources: usize,
    pub tables: usize,
    pub columns: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Health {
    pub status: String,
    pub forest_version: Option<u64>,
    pub catalog: CatalogCounts,
    pub forest_nodes: usize,
    pub running_job: Option<String>,
    pub provider: ProviderKind,
    /// Embedder of the current forest, if any.
    pub embedder: Option<EmbedderDescriptor>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IngestRequest {
    pub name: String,
    pub ddl: String,
    #[serde(default)]
    pub origin: Option<String>,
    /// Sidecar metadata text (`key = value` lines).
    #[serde(default)]
    pub sidecar: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IngestResponse {
    pub sources: Vec<IngestSummary>,
    pub catalog: CatalogCounts,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceView {
    #[serde(flatten)]
    pub source: SourceRecord,
    pub origin_kind: String,
    pub tables: usize,
    pub columns: usize,
    pub diagnostics: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceList {
    pub sources: Vec<SourceView>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValuesRequest {
    pub column_path: String,
    /// `null` entries are SQL NULLs.
    pub values: Vec<Option<String>>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BuildRequest {
    /// A failed job id, or `latest` for the most recent failed job.
    #[serde(default)]
    pub resume: Option<String>,
    #[serde(default)]
    pub k: Option<usize>,
    #[serde(default)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JobList {
    pub jobs: Vec<BuildJob>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RootResponse {
    pub forest_version: u64,
    pub nodes: Vec<NodeView>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeResponse {
    pub forest_version: u64,
    pub node: NodeView,
    pub children: Vec<NodeView>,
    /// From the parent up to the root.
    pub ancestors: Vec<NodeView>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ExpandRequest {
    /// Nodes currently on screen. Defaults to the roots plus the path to the
    /// expanded node and the siblings along it.
    #[serde(default)]
    pub visible_nodes: Option<Vec<String>>,
    #[serde(default)]
    pub m: Option<usize>,
    #[serde(default)]
    pub threshold: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpandResponse {
    pub forest_version: u64,
    pub node: NodeView,
    pub children: Vec<NodeView>,
    pub edges: Vec<RelationEdge>,
    pub degraded: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchBody {
    #[serde(alias = "query")]
    pub query_text: String,
    #[serde(default)]
    pub n: Option<usize>,
    #[serde(default)]
    pub mode: Option<SearchMode>,
    #[serde(default)]
    pub kind_filter: Option<BTreeSet<NodeKind>>,
    #[serde(default)]
    pub include_categories: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchResult {
    pub forest_version: u64,
    #[serde(flatten)]
    pub response: SearchResponse,
    /// One entry per hit, in hit order.
    pub hit_nodes: Vec<NodeView>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategyRegistration {
    pub kind: StrategyKind,
    pub name: String,
    /// Path of an external plugin executable.
    #[serde(default)]
    pub exec: Option<String>,
    /// Id of a builtin implementation to register under a new name.
    #[serde(default)]
    pub builtin: Option<String>,
    #[serde(default)]
    pub activate: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategyList {
    pub strategies: Vec<StrategyDescriptor>,
}
