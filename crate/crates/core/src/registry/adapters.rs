//! Registry strategies behind the traits the pipeline consumes. Each adapter
//! is bound to one strategy name, so a build keeps using the strategy that
//! was active when it started.

use std::collections::HashMap;
use std::sync::Arc;

use super::contract::{ClusterRequest, EmbedRequest, Point, RelateRequest};
use super::{Registry, RegistryError, StrategyKind, CONTRACT_VERSION};
use crate::cluster::{ClusterError, ClusteringStrategy};
use crate::embed::{EmbedError, Embedder, EmbedderDescriptor, EmbedderKind, EmbeddingVector};
use crate::hierarchy::CatalogNode;
use crate::relation::{RelationError, RelationScorer};

fn point(id: &str, v: &EmbeddingVector) -> Point {
    Point {
        id: id.to_string(),
        vector: v.values().to_vec(),
    }
}

pub struct StrategyClusterer {
    registry: Arc<Registry>,
    name: String,
}

impl StrategyClusterer {
    pub fn new(registry: Arc<Registry>, name: &str) -> Result<Self, RegistryError> {
        registry.get(StrategyKind::Clustering, name)?;
        Ok(Self {
            registry,
            name: name.to_string(),
        })
    }

    pub fn active(registry: Arc<Registry>) -> Result<Self, RegistryError> {
        let name = registry.active(StrategyKind::Clustering)?.name;
        Self::new(registry, &name)
    }
}

impl ClusteringStrategy for StrategyClusterer {
    fn name(&self) -> &str {
        &self.name
    }

    fn cluster(
        &self,
        points: &[(&str, &EmbeddingVector)],
        c: usize,
        seed: u64,
        max_iters: usize,
    ) -> Result<Vec<Vec<usize>>, ClusterError> {
        let req = ClusterRequest {
            points: points.iter().map(|(id, v)| point(id, v)).collect(),
            c,
            seed,
            max_iters,
        };
        let resp = self.registry.cluster(&self.name, &req).map_err(|e| match e {
            RegistryError::ContractViolation(m) => ClusterError::ContractViolation(format!("{}: {m}", self.name)),
            e => ClusterError::Strategy(format!("{}: {e}", self.name)),
        })?;
        let position: HashMap<&str, usize> = points.iter().enumerate().map(|(i, (id, _))| (*id, i)).collect();
        Ok(resp
            .groups
            .iter()
            .map(|g| g.iter().map(|id| position[id.as_str()]).collect())
            .collect())
    }
}

pub struct StrategyEmbedder {
    registry: Arc<Registry>,
    name: String,
    descriptor: EmbedderDescriptor,
}

impl StrategyEmbedder {
    /// Only external strategies need this adapter; the built-in is the
    /// offline embedder itself.
    pub fn new(registry: Arc<Registry>, name: &str) -> Result<Self, RegistryError> {
        let d = registry.get(StrategyKind::Embedding, name)?;
        let dim = d
            .declared_dim
            .ok_or_else(|| RegistryError::HandshakeFailed(format!("{name} declared no dimension")))?;
        Ok(Self {
            registry,
            name: name.to_string(),
            descriptor: EmbedderDescriptor {
                name: name.to_string(),
                dim,
                kind: EmbedderKind::External,
                version: CONTRACT_VERSION,
            },
        })
    }
}

impl Embedder for StrategyEmbedder {
    fn descriptor(&self) -> &EmbedderDescriptor {
        &self.descriptor
    }

    fn embed(&self, text: &str) -> Result<EmbeddingVector, EmbedError> {
        Ok(self.embed_batch(&[text])?.remove(0))
    }

    fn embed_batch(&self, texts: &[&str]) -> Result<Vec<EmbeddingVector>, EmbedError> {
        if texts.iter().any(|t| t.trim().is_empty()) {
            return Err(EmbedError::EmptyText);
        }
        let req = EmbedRequest {
            texts: texts.iter().map(|t| t.to_string()).collect(),
        };
        let resp = self
            .registry
            .embed(&self.name, &req)
            .map_err(|e| EmbedError::ProviderUnavailable(format!("{}: {e}", self.name)))?;
        Ok(resp.vectors.into_iter().map(EmbeddingVector::from_raw).collect())
    }
}

pub struct StrategyRelationScorer {
    registry: Arc<Registry>,
    name: String,
}

impl StrategyRelationScorer {
    pub fn new(registry: Arc<Registry>, name: &str) -> Result<Self, RegistryError> {
        registry.get(StrategyKind::Relation, name)?;
        Ok(Self {
            registry,
            name: name.to_string(),
        })
    }
}

impl RelationScorer for StrategyRelationScorer {
    fn name(&self) -> &str {
        &self.name
    }

    fn top_m(
        &self,
        node: &CatalogNode,
        candidates: &[&CatalogNode],
        m: usize,
        threshold: f64,
    ) -> Result<Vec<(String, f64)>, RelationError> {
        let req = RelateRequest {
            node: point(&node.node_id, &node.embedding),
            candidates: candidates.iter().map(|c| point(&c.node_id, &c.embedding)).collect(),
            m,
            threshold,
        };
        let resp = self
            .registry
            .relate(&self.name, &req)
            .map_err(|e| RelationError::Strategy(format!("{}: {e}", self.name)))?;
        Ok(resp.pairs.into_iter().map(|p| (p.id, p.score)).collect())
    }
}
