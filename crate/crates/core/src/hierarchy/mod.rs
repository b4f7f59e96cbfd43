//! The hierarchical catalog: column and table leaves grouped under
//! model-named categories until at most K top-level nodes remain.

mod build;

use std::collections::BTreeMap;
use std::io;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::cluster::ClusterError;
use crate::embed::{EmbedError, EmbedderDescriptor, EmbeddingVector};
use crate::gateway::GatewayError;
use crate::index::NodeKind;
use crate::jsonl;

pub use build::{abstract_frontier, build_hierarchy, leaf_nodes, BuildServices, LayerSink, NoSink};

pub const COLUMN_LEVEL: u32 = 0;
pub const TABLE_LEVEL: u32 = 1;
pub const FIRST_CATEGORY_LEVEL: u32 = 2;

#[derive(Debug, thiserror::Error)]
pub enum HierarchyError {
    #[error("frontier is empty")]
    EmptyFrontier,
    #[error("invalid hierarchy config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Cluster(#[from] ClusterError),
    #[error("clustering contract violated: {0}")]
    ContractViolation(String),
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error(transparent)]
    Embed(#[from] EmbedError),
    #[error("no profile for node {0}")]
    MissingProfile(String),
    #[error("unknown node {0}")]
    UnknownNode(String),
    #[error("invariant violated: {0}")]
    Invariant(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CatalogNode {
    pub node_id: String,
    pub kind: NodeKind,
    pub label: String,
    pub summary_text: String,
    pub embedding: EmbeddingVector,
    pub children: Vec<String>,
    pub parent: Option<String>,
    pub level: u32,
    pub member_leaf_count: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CategoryEmbedding {
    /// Normalized mean of the children's embeddings.
    #[default]
    Centroid,
    /// Embedding of the category phrase itself.
    Phrase,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct HierarchyConfig {
    #[serde(rename = "K")]
    pub k: usize,
    #[serde(rename = "B")]
    pub branching: usize,
    pub clustering_strategy: String,
    pub seed: u64,
    pub max_kmeans_iters: usize,
    #[serde(default)]
    pub category_embedding: CategoryEmbedding,
}

impl Default for HierarchyConfig {
    fn default() -> Self {
        Self {
            k: 12,
            branching: 8,
            clustering_strategy: "spherical-kmeans".into(),
            seed: 1,
            max_kmeans_iters: 50,
            category_embedding: CategoryEmbedding::Centroid,
        }
    }
}

impl HierarchyConfig {
    pub fn validate(&self) -> Result<(), HierarchyError> {
        if self.k < 1 {
            return Err(HierarchyError::InvalidConfig("K must be at least 1".into()));
        }
        if self.branching < 2 {
            return Err(HierarchyError::InvalidConfig("B must be at least 2".into()));
        }
        if self.clustering_strategy.trim().is_empty() {
            return Err(HierarchyError::InvalidConfig("clustering strategy name is empty".into()));
        }
        Ok(())
    }

    /// Clusters formed from a frontier of `n` nodes: `max(K, ceil(n / B))`.
    pub fn target_clusters(&self, n: usize) -> usize {
        self.k.max(n.div_ceil(self.branching))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestMeta {
    pub config: HierarchyConfig,
    pub embedder: EmbedderDescriptor,
    /// Node count per level, from level 0 upward.
    pub layer_sizes: Vec<usize>,
    pub root_count: usize,
    pub leaf_count: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Forest {
    meta: ForestMeta,
    nodes: BTreeMap<String, CatalogNode>,
}

impl Forest {
    pub fn from_nodes(
        config: HierarchyConfig,
        embedder: EmbedderDescriptor,
        nodes: impl IntoIterator<Item = CatalogNode>,
    ) -> Result<Self, HierarchyError> {
        let nodes: BTreeMap<String, CatalogNode> = nodes.into_iter().map(|n| (n.node_id.clone(), n)).collect();
        let top = nodes.values().map(|n| n.level).max().unwrap_or(0);
        let mut layer_sizes = vec![0; if nodes.is_empty() { 0 } else { top as usize + 1 }];
        for n in nodes.values() {
            layer_sizes[n.level as usize] += 1;
        }
        let roots: Vec<&CatalogNode> = nodes.values().filter(|n| n.parent.is_none()).collect();
        let meta = ForestMeta {
            config,
            embedder,
            layer_sizes,
            root_count: roots.len(),
            leaf_count: roots.iter().map(|n| n.member_leaf_count).sum(),
        };
        let forest = Self { meta, nodes };
        forest.check()?;
        Ok(forest)
    }

    pub fn meta(&self) -> &ForestMeta {
        &self.meta
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn node(&self, id: &str) -> Option<&CatalogNode> {
        self.nodes.get(id)
    }

    pub fn nodes(&self) -> impl Iterator<Item = &CatalogNode> {
        self.nodes.values()
    }

    /// Parentless nodes in node_id order.
    pub fn roots(&self) -> Vec<&CatalogNode> {
        self.nodes.values().filter(|n| n.parent.is_none()).collect()
    }

    pub fn top_level(&self) -> u32 {
        self.meta.layer_sizes.len().saturating_sub(1) as u32
    }

    /// Nodes at `level` in node_id order.
    pub fn get_layer(&self, level: u32) -> Vec<&CatalogNode> {
        self.nodes.values().filter(|n| n.level == level).collect()
    }

    pub fn children_of(&self, id: &str) -> Result<Vec<&CatalogNode>, HierarchyError> {
        let node = self.node(id).ok_or_else(|| HierarchyError::UnknownNode(id.to_string()))?;
        Ok(node.children.iter().filter_map(|c| self.nodes.get(c)).collect())
    }

    /// Ancestors from the parent up to the root.
    pub fn ancestors(&self, id: &str) -> Vec<&CatalogNode> {
        let mut out = Vec::new();
        let mut cur = self.node(id).and_then(|n| n.parent.as_deref());
        while let Some(p) = cur.and_then(|p| self.nodes.get(p)) {
            out.push(p);
            cur = p.parent.as_deref();
        }
        out
    }

    /// Verifies the forest invariants.
    pub fn check(&self) -> Result<(), HierarchyError> {
        let bad = |m: String| Err(HierarchyError::Invariant(m));
        let mut seen_as_child: BTreeMap<&str, &str> = BTreeMap::new();
        for n in self.nodes.values() {
            let mut sum = 0;
            for c in &n.children {
                let Some(child) = self.nodes.get(c) else {
                    return bad(format!("{} lists missing child {c}", n.node_id));
                };
                if let Some(prev) = seen_as_child.insert(c, &n.node_id) {
                    return bad(format!("{c} has two parents: {prev}, {}", n.node_id));
                }
                if child.parent.as_deref() != Some(n.node_id.as_str()) {
                    return bad(format!("{c} does not point back to {}", n.node_id));
                }
                if child.level >= n.level {
                    return bad(format!("level does not increase from {c} to {}", n.node_id));
                }
                sum += child.member_leaf_count;
            }
            if !n.children.is_empty() && sum != n.member_leaf_count {
                return bad(format!("{} counts {} leaves, children sum to {sum}", n.node_id, n.member_leaf_count));
            }
            if n.member_leaf_count == 0 {
                return bad(format!("{} has no leaves", n.node_id));
            }
            if let Some(p) = &n.parent {
                if !self.nodes.get(p).is_some_and(|pn| pn.children.contains(&n.node_id)) {
                    return bad(format!("{} claims parent {p} which does not list it", n.node_id));
                }
            }
            if n.kind == NodeKind::Category {
                let words = n.label.split_whitespace().count();
                if words == 0 || words > crate::gateway::CATEGORY_MAX_WORDS {
                    return bad(format!("category {} label `{}` has {words} words", n.node_id, n.label));
                }
            }
        }
        Ok(())
    }

    /// Writes `forest.json` and `nodes.jsonl` (ordered by level, then id).
    pub fn save(&self, dir: &Path) -> io::Result<()> {
        std::fs::create_dir_all(dir)?;
        let mut ordered: Vec<&CatalogNode> = self.nodes.values().collect();
        ordered.sort_by(|a, b| a.level.cmp(&b.level).then_with(|| a.node_id.cmp(&b.node_id)));
        jsonl::write_atomic(&dir.join("nodes.jsonl"), ordered)?;
        let meta = serde_json::to_vec_pretty(&self.meta)?;
        let tmp = dir.join("forest.json.tmp");
        std::fs::write(&tmp, meta)?;
        std::fs::rename(tmp, dir.join("forest.json"))
    }

    pub fn load(dir: &Path) -> Result<Self, HierarchyError> {
        let meta: ForestMeta = serde_json::from_slice(&std::fs::read(dir.join("forest.json"))?)
            .map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e))?;
        let nodes: Vec<CatalogNode> = jsonl::read(&dir.join("nodes.jsonl"))?;
        let forest = Self::from_nodes(meta.config.clone(), meta.embedder.clone(), nodes)?;
        if forest.meta != meta {
            return Err(HierarchyError::Invariant("forest.json does not match nodes.jsonl".into()));
        }
        Ok(forest)
    }
}

#[cfg(test)]
mod tests;
