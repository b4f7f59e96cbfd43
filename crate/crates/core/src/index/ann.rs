//! Approximate search strategies and their admission check.

use super::corpus::clustered_unit_vectors;
use super::{dot, IndexEntry, IndexError, NodeKind, SearchFilter, SearchHit, VectorIndex};
use crate::cluster::spherical_kmeans;
use crate::embed::{EmbedderDescriptor, EmbeddingVector};

pub const ADMISSION_CORPUS_SEED: u64 = 13;
pub const ADMISSION_CORPUS_SIZE: usize = 10_000;
pub const ADMISSION_MIN_RECALL: f64 = 0.95;
const ADMISSION_DIM: usize = 64;
const ADMISSION_CENTERS: usize = 100;
const ADMISSION_SPREAD: f64 = 0.6;
const ADMISSION_QUERIES: usize = 100;
const RECALL_K: usize = 10;

/// A non-exact top-n strategy. `prepare` must be called after the index
/// changes; answers for an index that changed since are computed exactly.
pub trait ApproximateSearch: Send + Sync {
    fn name(&self) -> &str;
    fn prepare(&mut self, index: &VectorIndex) -> Result<(), IndexError>;
    fn top_n(
        &self,
        index: &VectorIndex,
        query: &EmbeddingVector,
        n: usize,
        filter: &SearchFilter,
    ) -> Result<Vec<SearchHit>, IndexError>;
}

/// Inverted-file search: entries are bucketed by spherical k-means and a
/// query scans only the `nprobe` buckets with the closest centroids.
pub struct IvfSearch {
    nlist: usize,
    nprobe: usize,
    seed: u64,
    prepared_len: Option<usize>,
    centroids: Vec<EmbeddingVector>,
    lists: Vec<Vec<usize>>,
}

impl IvfSearch {
    pub fn new(nlist: usize, nprobe: usize, seed: u64) -> Self {
        Self {
            nlist: nlist.max(1),
            nprobe: nprobe.max(1),
            seed,
            prepared_len: None,
            centroids: Vec::new(),
            lists: Vec::new(),
        }
    }
}

impl ApproximateSearch for IvfSearch {
    fn name(&self) -> &str {
        "ivf"
    }

    fn prepare(&mut self, index: &VectorIndex) -> Result<(), IndexError> {
        self.centroids.clear();
        self.lists.clear();
        self.prepared_len = Some(index.len());
        if index.is_empty() {
            return Ok(());
        }
        let vectors: Vec<EmbeddingVector> = (0..index.len())
            .map(|p| EmbeddingVector::from_raw(index.row(p).to_vec()))
            .collect();
        let points: Vec<(&str, &EmbeddingVector)> = index
            .slots
            .iter()
            .map(|s| s.node_id.as_str())
            .zip(&vectors)
            .collect();
        let c = self.nlist.min(points.len());
        let groups = spherical_kmeans(&points, c, self.seed, 15)
            .map_err(|e| IndexError::CorruptFile(format!("ivf clustering failed: {e}")))?;
        for g in groups {
            let centroid = EmbeddingVector::centroid(g.iter().map(|&p| &vectors[p]))
                .unwrap_or_else(|_| vectors[g[0]].clone());
            self.centroids.push(centroid);
            self.lists.push(g);
        }
        Ok(())
    }

    fn top_n(
        &self,
        index: &VectorIndex,
        query: &EmbeddingVector,
        n: usize,
        filter: &SearchFilter,
    ) -> Result<Vec<SearchHit>, IndexError> {
        if self.prepared_len != Some(index.len()) {
            return index.top_n(query, n, filter);
        }
        if query.dim() != index.dim() {
            return Err(IndexError::DimensionMismatch {
                expected: index.dim(),
                actual: query.dim(),
            });
        }
        let mut probes: Vec<(f64, usize)> = self
            .centroids
            .iter()
            .enumerate()
            .map(|(i, c)| (dot(query.values(), c.values()), i))
            .collect();
        probes.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
        let candidates = probes
            .iter()
            .take(self.nprobe)
            .flat_map(|&(_, i)| self.lists[i].iter().copied());
        index.top_n_among(query, n, filter, candidates)
    }
}

/// Mean fraction of the exact top-k found by the approximate top-k.
pub fn recall_at_k(exact: &[Vec<SearchHit>], approx: &[Vec<SearchHit>]) -> f64 {
    if exact.is_empty() {
        return 1.0;
    }
    let total: f64 = exact
        .iter()
        .zip(approx)
        .map(|(e, a)| {
            if e.is_empty() {
                return 1.0;
            }
            let found = e.iter().filter(|h| a.iter().any(|x| x.node_id == h.node_id)).count();
            found as f64 / e.len() as f64
        })
        .sum();
    total / exact.len() as f64
}

/// Runs `strategy` against the exact scan on the fixed seed-13 corpus of
/// 10,000 clustered vectors and returns its recall@10, or `RecallTooLow`.
pub fn admit_approximate(strategy: &mut dyn ApproximateSearch) -> Result<f64, IndexError> {
    let all = clustered_unit_vectors(
        ADMISSION_CORPUS_SEED,
        ADMISSION_CORPUS_SIZE + ADMISSION_QUERIES,
        ADMISSION_DIM,
        ADMISSION_CENTERS,
        ADMISSION_SPREAD,
    );
    let (corpus, queries) = all.split_at(ADMISSION_CORPUS_SIZE);
    let mut index = VectorIndex::new(EmbedderDescriptor::offline(ADMISSION_DIM));
    for (i, v) in corpus.iter().enumerate() {
        index.upsert(IndexEntry {
            node_id: format!("v{i:05}"),
            vector: v.clone(),
            node_kind: NodeKind::Column,
            visible_in_search: true,
        })?;
    }
    strategy.prepare(&index)?;
    let filter = SearchFilter::default();
    let mut exact = Vec::with_capacity(queries.len());
    let mut approx = Vec::with_capacity(queries.len());
    for q in queries {
        exact.push(index.top_n(q, RECALL_K, &filter)?);
        approx.push(strategy.top_n(&index, q, RECALL_K, &filter)?);
    }
    let recall = recall_at_k(&exact, &approx);
    if recall < ADMISSION_MIN_RECALL {
        return Err(IndexError::RecallTooLow {
            name: strategy.name().to_string(),
            recall,
            required: ADMISSION_MIN_RECALL,
        });
    }
    Ok(recall)
}
