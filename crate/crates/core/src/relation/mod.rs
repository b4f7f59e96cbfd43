//! Similarity-weighted edges between newly expanded nodes and the visible
//! graph, plus heuristic join/union edges.

mod heuristics;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::gateway::{Bindings, ModelGateway, ProviderKind, TemplateId};
use crate::hierarchy::{CatalogNode, Forest};
use crate::ids::content_hash;
use crate::index::NodeKind;
use crate::ingest::PhysicalCatalog;
use crate::jsonl;

pub use heuristics::{
    detect_joinable, detect_unionable, join_tokens, ColumnView, JoinEvidence, TableView, UnionEvidence,
    NAME_JACCARD_MIN, UNION_COVERAGE_MIN,
};

pub const DEFAULT_M: usize = 5;
pub const DEFAULT_THRESHOLD: f64 = 0.60;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum RelationError {
    #[error("unknown node {0}")]
    UnknownNode(String),
    #[error("m must be at least 1")]
    InvalidM,
    #[error("node {0} is both new and visible")]
    OverlappingContext(String),
    #[error("relation store i/o: {0}")]
    Io(String),
    #[error("relation strategy failed: {0}")]
    Strategy(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RelationKind {
    Semantic,
    Joinable,
    Unionable,
}

impl RelationKind {
    pub fn as_str(self) -> &'static str {
        match self {
            RelationKind::Semantic => "semantic",
            RelationKind::Joinable => "joinable",
            RelationKind::Unionable => "unionable",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeProvider {
    Offline,
    Remote,
    Heuristic,
}

impl From<ProviderKind> for EdgeProvider {
    fn from(k: ProviderKind) -> Self {
        match k {
            ProviderKind::Offline => EdgeProvider::Offline,
            ProviderKind::Remote => EdgeProvider::Remote,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Evidence {
    Join(JoinEvidence),
    Union(UnionEvidence),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelationEdge {
    pub edge_id: String,
    pub from_node: String,
    pub to_node: String,
    /// Cosine of the two embeddings, rounded to 4 decimal places.
    pub weight: f64,
    pub relation_kind: RelationKind,
    pub description: String,
    pub provider_kind: EdgeProvider,
    #[serde(default)]
    pub degraded: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub evidence: Option<Evidence>,
}

/// One id per (unordered pair, kind).
pub fn edge_id(a: &str, b: &str, kind: RelationKind) -> String {
    let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
    format!("edge_{}", content_hash(&["edge", kind.as_str(), lo, hi]))
}

pub fn round4(x: f64) -> f64 {
    (x * 10_000.0).round() / 10_000.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpansionContext {
    pub expanded_node: String,
    pub new_nodes: Vec<String>,
    pub visible_nodes: Vec<String>,
    pub m: usize,
    pub threshold: f64,
}

impl ExpansionContext {
    pub fn new(expanded_node: impl Into<String>, new_nodes: Vec<String>, visible_nodes: Vec<String>) -> Self {
        Self {
            expanded_node: expanded_node.into(),
            new_nodes,
            visible_nodes,
            m: DEFAULT_M,
            threshold: DEFAULT_THRESHOLD,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ExpansionResult {
    pub edges: Vec<RelationEdge>,
    /// Set when at least one description fell back to a placeholder.
    pub degraded: bool,
}

/// Semantic edges cached per forest version; degraded edges are not cached
/// so a later expansion can retry the description.
#[derive(Debug)]
pub struct RelationCache {
    forest_version: u64,
    edges: Mutex<HashMap<String, RelationEdge>>,
    file: Option<PathBuf>,
}

impl RelationCache {
    pub fn in_memory(forest_version: u64) -> Self {
        Self {
            forest_version,
            edges: Mutex::new(HashMap::new()),
            file: None,
        }
    }

    /// Backed by `dir/v{forest_version}.jsonl`, loaded if present.
    pub fn open(dir: &Path, forest_version: u64) -> Result<Self, RelationError> {
        let file = dir.join(format!("v{forest_version}.jsonl"));
        let stored: Vec<RelationEdge> = jsonl::read_tolerant(&file).map_err(|e| RelationError::Io(e.to_string()))?;
        Ok(Self {
            forest_version,
            edges: Mutex::new(stored.into_iter().map(|e| (e.edge_id.clone(), e)).collect()),
            file: Some(file),
        })
    }

    pub fn forest_version(&self) -> u64 {
        self.forest_version
    }

    pub fn len(&self) -> usize {
        self.edges.lock().expect("relation cache lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn get(&self, id: &str) -> Option<RelationEdge> {
        self.edges.lock().expect("relation cache lock").get(id).cloned()
    }

    fn put(&self, edge: &RelationEdge) -> Result<(), RelationError> {
        let mut edges = self.edges.lock().expect("relation cache lock");
        if edges.contains_key(&edge.edge_id) {
            return Ok(());
        }
        if let Some(file) = &self.file {
            jsonl::append(file, edge).map_err(|e| RelationError::Io(e.to_string()))?;
        }
        edges.insert(edge.edge_id.clone(), edge.clone());
        Ok(())
    }

    /// Every stored edge touching `node_id`, ordered by edge id.
    pub fn edges_of(&self, node_id: &str) -> Vec<RelationEdge> {
        let edges = self.edges.lock().expect("relation cache lock");
        let mut out: Vec<RelationEdge> = edges
            .values()
            .filter(|e| e.from_node == node_id || e.to_node == node_id)
            .cloned()
            .collect();
        out.sort_by(|a, b| a.edge_id.cmp(&b.edge_id));
        out
    }
}

/// Replacement for the built-in cosine top-m selection of semantic edges.
pub trait RelationScorer: Send + Sync {
    fn name(&self) -> &str;

    /// Picks at most `m` of `candidates` for `node`, each with a weight in
    /// [-1, 1]. Candidates arrive already ranked by cosine.
    fn top_m(
        &self,
        node: &CatalogNode,
        candidates: &[&CatalogNode],
        m: usize,
        threshold: f64,
    ) -> Result<Vec<(String, f64)>, RelationError>;
}

pub struct RelationServices<'a> {
    pub forest: &'a Forest,
    pub catalog: &'a PhysicalCatalog,
    pub gateway: &'a ModelGateway,
    pub cache: &'a RelationCache,
    /// `None` uses the built-in cosine top-m.
    pub scorer: Option<&'a dyn RelationScorer>,
}

/// Candidates for `node`: visible nodes other than itself, its ancestors and
/// its siblings, with their cosine, sorted by (score desc, id asc).
pub fn ranked_candidates<'f>(
    forest: &'f Forest,
    node: &CatalogNode,
    visible: &[&'f CatalogNode],
) -> Vec<(f64, &'f CatalogNode)> {
    let mut excluded: BTreeSet<&str> = forest.ancestors(&node.node_id).iter().map(|a| a.node_id.as_str()).collect();
    excluded.insert(&node.node_id);
    if let Some(parent) = node.parent.as_deref().and_then(|p| forest.node(p)) {
        excluded.extend(parent.children.iter().map(String::as_str));
    } else {
        // parentless nodes are siblings of every other root
        excluded.extend(forest.roots().iter().map(|r| r.node_id.as_str()));
    }
    let mut scored: Vec<(f64, &CatalogNode)> = visible
        .iter()
        .filter(|v| !excluded.contains(v.node_id.as_str()))
        .map(|v| (node.embedding.dot(&v.embedding), *v))
        .collect();
    scored.sort_by(|a, b| b.0.total_cmp(&a.0).then_with(|| a.1.node_id.cmp(&b.1.node_id)));
    scored
}

pub fn analyze_expansion(ctx: &ExpansionContext, services: &RelationServices<'_>) -> Result<ExpansionResult, RelationError> {
    if ctx.m == 0 {
        return Err(RelationError::InvalidM);
    }
    let forest = services.forest;
    let lookup = |id: &String| forest.node(id).ok_or_else(|| RelationError::UnknownNode(id.clone()));
    lookup(&ctx.expanded_node)?;
    let visible_ids: BTreeSet<&String> = ctx.visible_nodes.iter().collect();
    let visible: Vec<&CatalogNode> = visible_ids.iter().map(|id| lookup(id)).collect::<Result<_, _>>()?;
    let mut new_ids: Vec<&String> = ctx.new_nodes.iter().collect();
    new_ids.sort();
    new_ids.dedup();
    if let Some(overlap) = new_ids.iter().find(|id| visible_ids.contains(*id)) {
        return Err(RelationError::OverlappingContext((*overlap).clone()));
    }
    let new_nodes: Vec<&CatalogNode> = new_ids.into_iter().map(lookup).collect::<Result<_, _>>()?;

    let mut out: BTreeMap<String, RelationEdge> = BTreeMap::new();
    let mut order: Vec<String> = Vec::new();
    let mut degraded = false;
    let mut push = |edge: RelationEdge, out: &mut BTreeMap<String, RelationEdge>| {
        if !out.contains_key(&edge.edge_id) {
            order.push(edge.edge_id.clone());
            out.insert(edge.edge_id.clone(), edge);
        }
    };

    for node in new_nodes {
        let candidates = ranked_candidates(forest, node, &visible);
        let chosen: Vec<(f64, &CatalogNode)> = match services.scorer {
            None => candidates
                .iter()
                .take(ctx.m)
                .filter(|(s, _)| *s >= ctx.threshold)
                .copied()
                .collect(),
            Some(scorer) => {
                let pool: Vec<&CatalogNode> = candidates.iter().map(|(_, c)| *c).collect();
                let picked = scorer.top_m(node, &pool, ctx.m, ctx.threshold)?;
                if picked.len() > ctx.m {
                    return Err(RelationError::Strategy(format!("{} returned more than m pairs", scorer.name())));
                }
                picked
                    .into_iter()
                    .map(|(id, w)| {
                        let other = pool.iter().find(|c| c.node_id == id).ok_or_else(|| {
                            RelationError::Strategy(format!("{} returned non-candidate {id}", scorer.name()))
                        })?;
                        if !(-1.0..=1.0).contains(&w) {
                            return Err(RelationError::Strategy(format!("weight {w} out of range")));
                        }
                        Ok((w, *other))
                    })
                    .collect::<Result<_, _>>()?
            }
        };
        for (score, other) in chosen {
            let edge = semantic_edge(node, other, score, services)?;
            degraded |= edge.degraded;
            push(edge, &mut out);
        }
        for (score, other) in &candidates {
            if let Some(edge) = heuristic_edge(node, other, *score, services.catalog) {
                push(edge, &mut out);
            }
        }
    }
    let edges = order.into_iter().filter_map(|id| out.remove(&id)).collect();
    Ok(ExpansionResult { edges, degraded })
}

fn semantic_edge(
    from: &CatalogNode,
    to: &CatalogNode,
    cosine: f64,
    services: &RelationServices<'_>,
) -> Result<RelationEdge, RelationError> {
    let id = edge_id(&from.node_id, &to.node_id, RelationKind::Semantic);
    if let Some(hit) = services.cache.get(&id) {
        return Ok(hit);
    }
    let weight = round4(cosine.clamp(-1.0, 1.0));
    let mut b = Bindings::new();
    b.insert("cosine".into(), format!("{weight:.4}"));
    b.insert("from_label".into(), from.label.clone());
    b.insert("from_summary".into(), from.summary_text.clone());
    b.insert("to_label".into(), to.label.clone());
    b.insert("to_summary".into(), to.summary_text.clone());
    let (description, degraded) = match services.gateway.complete(TemplateId::DescribeRelation, &b) {
        Ok(c) => (c.text, false),
        Err(e) => {
            tracing::warn!(from = %from.node_id, to = %to.node_id, error = %e, "relation description unavailable");
            (format!("similar (cosine={weight:.2}); description unavailable"), true)
        }
    };
    let edge = RelationEdge {
        edge_id: id,
        from_node: from.node_id.clone(),
        to_node: to.node_id.clone(),
        weight,
        relation_kind: RelationKind::Semantic,
        description,
        provider_kind: services.gateway.provider_kind().into(),
        degraded,
        evidence: None,
    };
    if !degraded {
        services.cache.put(&edge)?;
    }
    Ok(edge)
}

fn heuristic_edge(from: &CatalogNode, to: &CatalogNode, cosine: f64, catalog: &PhysicalCatalog) -> Option<RelationEdge> {
    let (kind, description, evidence) = match (from.kind, to.kind) {
        (NodeKind::Column, NodeKind::Column) => {
            let a = ColumnView::from_catalog(catalog, &from.node_id)?;
            let b = ColumnView::from_catalog(catalog, &to.node_id)?;
            let ev = detect_joinable(&a, &b)?;
            let text = format!("joinable: {} ~ {} ({})", from.label, to.label, ev.tests_passed.join(", "));
            (RelationKind::Joinable, text, Evidence::Join(ev))
        }
        (NodeKind::Table, NodeKind::Table) => {
            let a = TableView::from_catalog(catalog, &from.node_id)?;
            let b = TableView::from_catalog(catalog, &to.node_id)?;
            let ev = detect_unionable(&a, &b)?;
            let text = format!(
                "unionable: {} of columns match ({} pairs)",
                format_args!("{:.0}%", ev.coverage * 100.0),
                ev.mapping.len()
            );
            (RelationKind::Unionable, text, Evidence::Union(ev))
        }
        _ => return None,
    };
    Some(RelationEdge {
        edge_id: edge_id(&from.node_id, &to.node_id, kind),
        from_node: from.node_id.clone(),
        to_node: to.node_id.clone(),
        weight: round4(cosine.clamp(-1.0, 1.0)),
        relation_kind: kind,
        description,
        provider_kind: EdgeProvider::Heuristic,
        degraded: false,
        evidence: Some(evidence),
    })
}
