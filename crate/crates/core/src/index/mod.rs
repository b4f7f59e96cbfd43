//! Exact cosine vector index with a binary on-disk format and a slot for
//! approximate strategies.
//!
//! `top_n` is a full scan: every eligible entry is scored and the hits are
//! ordered by `(score desc, node_id asc)`. Vectors are stored unit-length,
//! so the dot product is the cosine.

mod ann;
pub mod corpus;
mod file;

use std::collections::{BTreeSet, HashMap};
use std::sync::{RwLock, RwLockReadGuard};

use serde::{Deserialize, Serialize};

use crate::embed::{EmbedderDescriptor, EmbeddingVector};

pub use ann::{admit_approximate, recall_at_k, ApproximateSearch, IvfSearch, ADMISSION_CORPUS_SEED, ADMISSION_MIN_RECALL};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeKind {
    Column,
    Table,
    Category,
}

impl NodeKind {
    pub fn as_str(self) -> &'static str {
        match self {
            NodeKind::Column => "column",
            NodeKind::Table => "table",
            NodeKind::Category => "category",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "column" => Some(NodeKind::Column),
            "table" => Some(NodeKind::Table),
            "category" => Some(NodeKind::Category),
            _ => None,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum IndexError {
    #[error("dimension mismatch: index has {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("n must be at least 1")]
    InvalidN,
    #[error("corrupt index file: {0}")]
    CorruptFile(String),
    #[error("approximate strategy `{name}` reached recall@10 {recall:.4}, below {required}")]
    RecallTooLow { name: String, recall: f64, required: f64 },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexEntry {
    pub node_id: String,
    pub vector: EmbeddingVector,
    pub node_kind: NodeKind,
    pub visible_in_search: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchHit {
    pub node_id: String,
    pub score: f64,
    pub rank: usize,
}

/// Restricts which entries a query may return. Hidden entries are skipped
/// unless `include_hidden` is set.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SearchFilter {
    pub kinds: Option<BTreeSet<NodeKind>>,
    pub include_hidden: bool,
}

impl SearchFilter {
    pub fn kinds(kinds: impl IntoIterator<Item = NodeKind>) -> Self {
        Self {
            kinds: Some(kinds.into_iter().collect()),
            include_hidden: false,
        }
    }

    pub fn with_hidden(mut self) -> Self {
        self.include_hidden = true;
        self
    }

    pub fn admits(&self, kind: NodeKind, visible: bool) -> bool {
        (visible || self.include_hidden) && self.kinds.as_ref().is_none_or(|k| k.contains(&kind))
    }
}

#[derive(Debug, Clone)]
struct Slot {
    node_id: String,
    node_kind: NodeKind,
    visible: bool,
}

/// Entries live in one flat row-major matrix; removal swaps the last row in.
#[derive(Debug, Clone)]
pub struct VectorIndex {
    descriptor: EmbedderDescriptor,
    slots: Vec<Slot>,
    matrix: Vec<f32>,
    positions: HashMap<String, usize>,
}

impl VectorIndex {
    pub fn new(descriptor: EmbedderDescriptor) -> Self {
        Self {
            descriptor,
            slots: Vec::new(),
            matrix: Vec::new(),
            positions: HashMap::new(),
        }
    }

    pub fn descriptor(&self) -> &EmbedderDescriptor {
        &self.descriptor
    }

    pub fn dim(&self) -> usize {
        self.descriptor.dim
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    pub fn contains(&self, node_id: &str) -> bool {
        self.positions.contains_key(node_id)
    }

    fn row(&self, pos: usize) -> &[f32] {
        let dim = self.dim();
        &self.matrix[pos * dim..(pos + 1) * dim]
    }

    pub fn get(&self, node_id: &str) -> Option<IndexEntry> {
        let &pos = self.positions.get(node_id)?;
        Some(self.entry_at(pos))
    }

    fn entry_at(&self, pos: usize) -> IndexEntry {
        let slot = &self.slots[pos];
        IndexEntry {
            node_id: slot.node_id.clone(),
            vector: EmbeddingVector::from_raw(self.row(pos).to_vec()),
            node_kind: slot.node_kind,
            visible_in_search: slot.visible,
        }
    }

    /// All entries in node_id order.
    pub fn entries(&self) -> Vec<IndexEntry> {
        let mut order: Vec<usize> = (0..self.len()).collect();
        order.sort_by(|&a, &b| self.slots[a].node_id.cmp(&self.slots[b].node_id));
        order.into_iter().map(|p| self.entry_at(p)).collect()
    }

    pub fn upsert(&mut self, entry: IndexEntry) -> Result<(), IndexError> {
        self.check_dim(entry.vector.dim())?;
        let slot = Slot {
            node_id: entry.node_id,
            node_kind: entry.node_kind,
            visible: entry.visible_in_search,
        };
        let dim = self.dim();
        match self.positions.get(&slot.node_id) {
            Some(&pos) => {
                self.matrix[pos * dim..(pos + 1) * dim].copy_from_slice(entry.vector.values());
                self.slots[pos] = slot;
            }
            None => {
                self.positions.insert(slot.node_id.clone(), self.slots.len());
                self.matrix.extend_from_slice(entry.vector.values());
                self.slots.push(slot);
            }
        }
        Ok(())
    }

    /// Applies every entry or none of them.
    pub fn upsert_batch(&mut self, entries: Vec<IndexEntry>) -> Result<(), IndexError> {
        for e in &entries {
            self.check_dim(e.vector.dim())?;
        }
        for e in entries {
            self.upsert(e)?;
        }
        Ok(())
    }

    pub fn remove(&mut self, node_id: &str) -> bool {
        let Some(pos) = self.positions.remove(node_id) else {
            return false;
        };
        let dim = self.dim();
        let last = self.slots.len() - 1;
        if pos != last {
            self.matrix.copy_within(last * dim..(last + 1) * dim, pos * dim);
            self.slots.swap(pos, last);
            self.positions.insert(self.slots[pos].node_id.clone(), pos);
        }
        self.slots.pop();
        self.matrix.truncate(last * dim);
        true
    }

    pub fn clear(&mut self) {
        self.slots.clear();
        self.matrix.clear();
        self.positions.clear();
    }

    fn check_dim(&self, actual: usize) -> Result<(), IndexError> {
        if actual != self.dim() {
            return Err(IndexError::DimensionMismatch {
                expected: self.dim(),
                actual,
            });
        }
        Ok(())
    }

    /// Cosine of `query` against a stored entry.
    pub fn score(&self, query: &EmbeddingVector, node_id: &str) -> Option<f64> {
        let &pos = self.positions.get(node_id)?;
        Some(dot(query.values(), self.row(pos)))
    }

    /// Exact top-n by full scan. An empty index yields no hits.
    pub fn top_n(&self, query: &EmbeddingVector, n: usize, filter: &SearchFilter) -> Result<Vec<SearchHit>, IndexError> {
        self.top_n_among(query, n, filter, 0..self.len())
    }

    pub(crate) fn top_n_among(
        &self,
        query: &EmbeddingVector,
        n: usize,
        filter: &SearchFilter,
        positions: impl IntoIterator<Item = usize>,
    ) -> Result<Vec<SearchHit>, IndexError> {
        if n == 0 {
            return Err(IndexError::InvalidN);
        }
        self.check_dim(query.dim())?;
        let q = query.values();
        let mut scored: Vec<(f64, usize)> = positions
            .into_iter()
            .filter(|&p| filter.admits(self.slots[p].node_kind, self.slots[p].visible))
            .map(|p| (dot(q, self.row(p)), p))
            .collect();
        let order = |a: &(f64, usize), b: &(f64, usize)| {
            b.0.total_cmp(&a.0)
                .then_with(|| self.slots[a.1].node_id.cmp(&self.slots[b.1].node_id))
        };
        if scored.len() > n {
            scored.select_nth_unstable_by(n - 1, order);
            scored.truncate(n);
        }
        scored.sort_by(order);
        Ok(scored
            .into_iter()
            .enumerate()
            .map(|(i, (score, p))| SearchHit {
                node_id: self.slots[p].node_id.clone(),
                score: score.clamp(-1.0, 1.0),
                rank: i + 1,
            })
            .collect())
    }

    pub fn save(&self, path: &std::path::Path) -> Result<(), IndexError> {
        file::save(self, path)
    }

    pub fn load(path: &std::path::Path) -> Result<Self, IndexError> {
        file::load(path)
    }
}

pub(crate) fn dot(a: &[f32], b: &[f32]) -> f64 {
    a.iter().zip(b).map(|(&x, &y)| f64::from(x) * f64::from(y)).sum()
}

/// Reader/writer wrapper: queries run concurrently and always see either
/// all or none of a batch.
#[derive(Debug)]
pub struct SharedIndex {
    inner: RwLock<VectorIndex>,
}

impl SharedIndex {
    pub fn new(index: VectorIndex) -> Self {
        Self {
            inner: RwLock::new(index),
        }
    }

    pub fn read(&self) -> RwLockReadGuard<'_, VectorIndex> {
        self.inner.read().unwrap_or_else(|e| e.into_inner())
    }

    pub fn upsert_batch(&self, entries: Vec<IndexEntry>) -> Result<(), IndexError> {
        self.inner.write().unwrap_or_else(|e| e.into_inner()).upsert_batch(entries)
    }

    pub fn replace(&self, index: VectorIndex) {
        *self.inner.write().unwrap_or_else(|e| e.into_inner()) = index;
    }

    pub fn top_n(&self, query: &EmbeddingVector, n: usize, filter: &SearchFilter) -> Result<Vec<SearchHit>, IndexError> {
        self.read().top_n(query, n, filter)
    }
}
