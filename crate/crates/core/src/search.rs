//! Natural-language search: rephrase, embed, exact top-n, then either
//! highlight hits in the committed forest or build a fresh hierarchy over them.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::cluster::ClusteringStrategy;
use crate::embed::{EmbedError, Embedder, EmbedderDescriptor};
use crate::gateway::{Bindings, ModelGateway, TemplateId};
use crate::hierarchy::{
    abstract_frontier, BuildServices, CatalogNode, Forest, HierarchyConfig, HierarchyError, NoSink,
    FIRST_CATEGORY_LEVEL,
};
use crate::index::{IndexEntry, IndexError, NodeKind, SearchFilter, SearchHit, VectorIndex};

pub const DEFAULT_N: usize = 20;

#[derive(Debug, thiserror::Error)]
pub enum SearchError {
    #[error("query is empty")]
    EmptyQuery,
    #[error("n must be at least 1")]
    InvalidN,
    #[error("kind filter may only contain column and table")]
    InvalidKindFilter,
    #[error(transparent)]
    Embed(#[from] EmbedError),
    #[error(transparent)]
    Index(#[from] IndexError),
    #[error(transparent)]
    Hierarchy(#[from] HierarchyError),
    #[error("index refers to node {0} missing from the forest")]
    MissingNode(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SearchMode {
    #[default]
    Highlight,
    FreshHierarchy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchRequest {
    pub query_text: String,
    #[serde(default = "default_n")]
    pub n: usize,
    #[serde(default)]
    pub mode: SearchMode,
    /// Column and/or table; `None` admits both.
    #[serde(default)]
    pub kind_filter: Option<BTreeSet<NodeKind>>,
    #[serde(default)]
    pub include_categories: bool,
}

fn default_n() -> usize {
    DEFAULT_N
}

impl SearchRequest {
    pub fn new(query_text: impl Into<String>) -> Self {
        Self {
            query_text: query_text.into(),
            n: DEFAULT_N,
            mode: SearchMode::Highlight,
            kind_filter: None,
            include_categories: false,
        }
    }

    pub fn with_n(mut self, n: usize) -> Self {
        self.n = n;
        self
    }

    pub fn fresh(mut self) -> Self {
        self.mode = SearchMode::FreshHierarchy;
        self
    }

    fn filter(&self) -> Result<SearchFilter, SearchError> {
        let mut kinds = match &self.kind_filter {
            Some(k) if k.contains(&NodeKind::Category) => return Err(SearchError::InvalidKindFilter),
            Some(k) if !k.is_empty() => k.clone(),
            _ => BTreeSet::from([NodeKind::Column, NodeKind::Table]),
        };
        if self.include_categories {
            kinds.insert(NodeKind::Category);
            Ok(SearchFilter::kinds(kinds).with_hidden())
        } else {
            Ok(SearchFilter::kinds(kinds))
        }
    }
}

/// A node of a result forest; hits keep their score.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultNode {
    pub node_id: String,
    pub kind: NodeKind,
    pub label: String,
    pub summary_text: String,
    pub level: u32,
    pub parent: Option<String>,
    pub children: Vec<String>,
    pub member_leaf_count: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub score: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultForest {
    pub roots: Vec<String>,
    /// Sorted by (level, node_id).
    pub nodes: Vec<ResultNode>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchResponse {
    pub rephrased_query: String,
    pub rephrase_degraded: bool,
    pub hits: Vec<SearchHit>,
    /// Hits plus all their ancestors, sorted (highlight mode only).
    pub highlight_set: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub result_forest: Option<ResultForest>,
}

pub struct SearchServices<'a> {
    pub gateway: &'a ModelGateway,
    pub embedder: &'a dyn Embedder,
    pub index: &'a VectorIndex,
    pub forest: &'a Forest,
    pub clusterer: &'a dyn ClusteringStrategy,
    pub hierarchy_config: &'a HierarchyConfig,
    pub example_query: &'a str,
}

/// Index entries for every forest node. Categories are stored but hidden
/// from default searches.
pub fn build_index(forest: &Forest, descriptor: EmbedderDescriptor) -> Result<VectorIndex, IndexError> {
    let mut index = VectorIndex::new(descriptor);
    index.upsert_batch(
        forest
            .nodes()
            .map(|n| IndexEntry {
                node_id: n.node_id.clone(),
                vector: n.embedding.clone(),
                node_kind: n.kind,
                visible_in_search: n.kind != NodeKind::Category,
            })
            .collect(),
    )?;
    Ok(index)
}

/// Returns `(rephrased, degraded)`; provider failures fall back to the query.
pub fn rephrase(gateway: &ModelGateway, query: &str, example: &str) -> (String, bool) {
    let bindings: Bindings = [("example", example), ("query", query)]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect();
    match gateway.complete(TemplateId::RephraseQuery, &bindings) {
        Ok(c) if !c.text.trim().is_empty() => (c.text.trim().to_string(), false),
        Ok(_) => (query.to_string(), true),
        Err(e) => {
            tracing::warn!(error = %e, "query rephrase failed, using the query as typed");
            (query.to_string(), true)
        }
    }
}

pub fn search(request: &SearchRequest, services: &SearchServices<'_>) -> Result<SearchResponse, SearchError> {
    let query = request.query_text.trim();
    if query.is_empty() {
        return Err(SearchError::EmptyQuery);
    }
    if request.n == 0 {
        return Err(SearchError::InvalidN);
    }
    let filter = request.filter()?;
    let (rephrased_query, rephrase_degraded) = rephrase(services.gateway, query, services.example_query);
    let vector = services.embedder.embed(&rephrased_query)?;
    let hits = services.index.top_n(&vector, request.n, &filter)?;
    for h in &hits {
        if services.forest.node(&h.node_id).is_none() {
            return Err(SearchError::MissingNode(h.node_id.clone()));
        }
    }

    let (highlight_set, result_forest) = match request.mode {
        SearchMode::Highlight => (highlight(services.forest, &hits), None),
        SearchMode::FreshHierarchy => (Vec::new(), Some(fresh_forest(&hits, services)?)),
    };
    Ok(SearchResponse {
        rephrased_query,
        rephrase_degraded,
        hits,
        highlight_set,
        result_forest,
    })
}

fn highlight(forest: &Forest, hits: &[SearchHit]) -> Vec<String> {
    let mut set = BTreeSet::new();
    for h in hits {
        set.insert(h.node_id.clone());
        set.extend(forest.ancestors(&h.node_id).into_iter().map(|a| a.node_id.clone()));
    }
    set.into_iter().collect()
}

/// Clusters the hits, detached from their original parents and children,
/// into new category layers.
fn fresh_forest(hits: &[SearchHit], services: &SearchServices<'_>) -> Result<ResultForest, SearchError> {
    if hits.is_empty() {
        return Ok(ResultForest {
            roots: Vec::new(),
            nodes: Vec::new(),
        });
    }
    let frontier: Vec<CatalogNode> = hits
        .iter()
        .map(|h| {
            let mut n = services.forest.node(&h.node_id).expect("checked").clone();
            n.children.clear();
            n.parent = None;
            n
        })
        .collect();
    let build = BuildServices {
        clusterer: services.clusterer,
        gateway: services.gateway,
        embedder: services.embedder,
    };
    let layers = abstract_frontier(
        frontier,
        FIRST_CATEGORY_LEVEL,
        services.hierarchy_config,
        &build,
        &[],
        &mut NoSink,
    )?;
    let mut nodes: Vec<ResultNode> = layers
        .into_iter()
        .flatten()
        .map(|n| ResultNode {
            score: hits.iter().find(|h| h.node_id == n.node_id).map(|h| h.score),
            node_id: n.node_id,
            kind: n.kind,
            label: n.label,
            summary_text: n.summary_text,
            level: n.level,
            parent: n.parent,
            children: n.children,
            member_leaf_count: n.member_leaf_count,
        })
        .collect();
    nodes.sort_by(|a, b| a.level.cmp(&b.level).then_with(|| a.node_id.cmp(&b.node_id)));
    let roots = nodes
        .iter()
        .filter(|n| n.parent.is_none())
        .map(|n| n.node_id.clone())
        .collect();
    Ok(ResultForest { roots, nodes })
}
