//! Text embedders and cosine similarity.
//!
//! The default [`OfflineHashEmbedder`] is a signed feature-hashing bag of
//! words: lowercase, split on non-alphanumerics, hash each token with 64-bit
//! FNV-1a, bucket by `hash mod dim`, sign by bit 63, accumulate, and
//! L2-normalize. Counts are integers until the final division, so the output
//! is bit-identical on every platform.

use serde::{Deserialize, Serialize};

use crate::gateway::{AttemptError, OpenAiClient, ProviderConfig};

pub const DEFAULT_DIM: usize = 256;
pub const EMBED_ENDPOINT_ENV: &str = "LAKESCOPE_EMBED_ENDPOINT";
pub const EMBED_MODEL_ENV: &str = "LAKESCOPE_EMBED_MODEL";
pub const EMBED_DIM_ENV: &str = "LAKESCOPE_EMBED_DIM";

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EmbedError {
    #[error("cannot embed empty text")]
    EmptyText,
    #[error("text hashes to the zero vector")]
    ZeroVector,
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("embedding provider unavailable: {0}")]
    ProviderUnavailable(String),
}

/// A finalized unit-length embedding.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EmbeddingVector(Vec<f32>);

impl EmbeddingVector {
    /// Normalizes `values` to unit length.
    pub fn normalized(values: &[f64]) -> Result<Self, EmbedError> {
        let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 || !norm.is_finite() {
            return Err(EmbedError::ZeroVector);
        }
        Ok(Self(values.iter().map(|v| (v / norm) as f32).collect()))
    }

    /// Wraps raw values without normalizing (used when loading stored vectors).
    pub fn from_raw(values: Vec<f32>) -> Self {
        Self(values)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn values(&self) -> &[f32] {
        &self.0
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|&v| f64::from(v) * f64::from(v)).sum::<f64>().sqrt()
    }

    pub fn dot(&self, other: &Self) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(&a, &b)| f64::from(a) * f64::from(b))
            .sum()
    }

    /// Normalized mean of `vectors` (all of one dimension).
    pub fn centroid<'a>(vectors: impl IntoIterator<Item = &'a EmbeddingVector>) -> Result<Self, EmbedError> {
        let mut sum: Vec<f64> = Vec::new();
        for v in vectors {
            if sum.is_empty() {
                sum = vec![0.0; v.dim()];
            } else if sum.len() != v.dim() {
                return Err(EmbedError::DimensionMismatch {
                    expected: sum.len(),
                    actual: v.dim(),
                });
            }
            for (s, &x) in sum.iter_mut().zip(&v.0) {
                *s += f64::from(x);
            }
        }
        Self::normalized(&sum)
    }
}

/// Cosine of two unit vectors, clamped to [-1, 1].
pub fn cosine(a: &EmbeddingVector, b: &EmbeddingVector) -> Result<f64, EmbedError> {
    if a.dim() != b.dim() {
        return Err(EmbedError::DimensionMismatch {
            expected: a.dim(),
            actual: b.dim(),
        });
    }
    Ok(a.dot(b).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EmbedderKind {
    OfflineHash,
    Remote,
    External,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct EmbedderDescriptor {
    pub name: String,
    pub dim: usize,
    pub kind: EmbedderKind,
    pub version: u32,
}

impl EmbedderDescriptor {
    pub fn offline(dim: usize) -> Self {
        Self {
            name: "offline-hash".into(),
            dim,
            kind: EmbedderKind::OfflineHash,
            version: 1,
        }
    }
}

pub trait Embedder: Send + Sync {
    fn descriptor(&self) -> &EmbedderDescriptor;

    fn embed(&self, text: &str) -> Result<EmbeddingVector, EmbedError>;

    fn embed_batch(&self, texts: &[&str]) -> Result<Vec<EmbeddingVector>, EmbedError> {
        texts.iter().map(|t| self.embed(t)).collect()
    }
}

pub fn fnv1a64(bytes: &[u8]) -> u64 {
    const OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
    const PRIME: u64 = 0x0000_0100_0000_01b3;
    bytes
        .iter()
        .fold(OFFSET, |h, &b| (h ^ u64::from(b)).wrapping_mul(PRIME))
}

#[derive(Debug, Clone)]
pub struct OfflineHashEmbedder {
    descriptor: EmbedderDescriptor,
}

impl Default for OfflineHashEmbedder {
    fn default() -> Self {
        Self::new(DEFAULT_DIM)
    }
}

impl OfflineHashEmbedder {
    pub fn new(dim: usize) -> Self {
        assert!(dim > 0, "embedding dimension must be positive");
        Self {
            descriptor: EmbedderDescriptor::offline(dim),
        }
    }
}

impl Embedder for OfflineHashEmbedder {
    fn descriptor(&self) -> &EmbedderDescriptor {
        &self.descriptor
    }

    fn embed(&self, text: &str) -> Result<EmbeddingVector, EmbedError> {
        let dim = self.descriptor.dim;
        let lowered = text.to_lowercase();
        let mut counts = vec![0i64; dim];
        let mut any = false;
        for token in lowered.split(|c: char| !c.is_alphanumeric()).filter(|t| !t.is_empty()) {
            any = true;
            let h = fnv1a64(token.as_bytes());
            let bucket = (h % dim as u64) as usize;
            counts[bucket] += if h >> 63 == 0 { 1 } else { -1 };
        }
        if !any {
            return Err(EmbedError::EmptyText);
        }
        let values: Vec<f64> = counts.iter().map(|&c| c as f64).collect();
        EmbeddingVector::normalized(&values)
    }
}

/// Embeddings from an OpenAI-compatible `/embeddings` endpoint.
///
/// The dimension is declared up front; any response of another size is an
/// error rather than a silently mixed index.
pub struct RemoteEmbedder {
    client: OpenAiClient,
    descriptor: EmbedderDescriptor,
    config: ProviderConfig,
}

impl RemoteEmbedder {
    pub fn new(endpoint: &str, model: &str, dim: usize, config: ProviderConfig) -> Result<Self, EmbedError> {
        let client = OpenAiClient::new(endpoint, model, config.timeout).map_err(EmbedError::ProviderUnavailable)?;
        Ok(Self {
            client,
            descriptor: EmbedderDescriptor {
                name: format!("remote:{model}"),
                dim,
                kind: EmbedderKind::Remote,
                version: 1,
            },
            config,
        })
    }

    /// Built from `LAKESCOPE_EMBED_ENDPOINT`, `LAKESCOPE_EMBED_MODEL` and
    /// `LAKESCOPE_EMBED_DIM`; `None` when no endpoint is configured.
    pub fn from_env(config: ProviderConfig) -> Option<Result<Self, EmbedError>> {
        let endpoint = std::env::var(EMBED_ENDPOINT_ENV).ok().filter(|e| !e.is_empty())?;
        let model = std::env::var(EMBED_MODEL_ENV).unwrap_or_else(|_| "text-embedding-3-small".into());
        let dim = match std::env::var(EMBED_DIM_ENV).ok().map(|d| d.parse::<usize>()) {
            Some(Ok(d)) if d > 0 => d,
            Some(_) => {
                return Some(Err(EmbedError::ProviderUnavailable(format!(
                    "{EMBED_DIM_ENV} must be a positive integer"
                ))))
            }
            None => {
                return Some(Err(EmbedError::ProviderUnavailable(format!(
                    "{EMBED_DIM_ENV} must declare the remote embedding dimension"
                ))))
            }
        };
        Some(Self::new(&endpoint, &model, dim, config))
    }
}

impl Embedder for RemoteEmbedder {
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
        let mut last = String::new();
        for retry in 0..=self.config.max_retries {
            if retry > 0 {
                std::thread::sleep(self.config.backoff(retry));
            }
            match self.client.embeddings(texts) {
                Ok(rows) => {
                    return rows
                        .iter()
                        .map(|row| {
                            if row.len() != self.descriptor.dim {
                                return Err(EmbedError::DimensionMismatch {
                                    expected: self.descriptor.dim,
                                    actual: row.len(),
                                });
                            }
                            EmbeddingVector::normalized(row)
                        })
                        .collect()
                }
                Err(AttemptError::Transient(e)) => last = e,
                Err(AttemptError::Fatal(e)) => return Err(EmbedError::ProviderUnavailable(e)),
            }
        }
        Err(EmbedError::ProviderUnavailable(last))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn embed(text: &str) -> EmbeddingVector {
        OfflineHashEmbedder::default().embed(text).unwrap()
    }

    /// Expected (bucket, value) pairs; every other bucket must be zero.
    fn assert_sparse(v: &EmbeddingVector, expected: &[(usize, f64)]) {
        assert_eq!(v.dim(), 256);
        for (i, &x) in v.values().iter().enumerate() {
            let want = expected.iter().find(|(b, _)| *b == i).map_or(0.0, |(_, w)| *w);
            assert!((f64::from(x) - want).abs() < 1e-7, "bucket {i}: {x} vs {want}");
        }
    }

    #[test]
    fn matches_independent_scratch_implementation() {
        // Frozen from a separate Python implementation of the five-step rule:
        // user -> 242(+), email -> 7(+), address -> 179(+)
        let third = 1.0 / 3f64.sqrt();
        assert_sparse(&embed("user email address"), &[(7, third), (179, third), (242, third)]);
        // users x2 -> 51(+), orders -> 76(+), 2024 -> 153(+)
        assert_sparse(
            &embed("Users, users; ORDERS_2024"),
            &[(51, 2.0 / 6f64.sqrt()), (76, 1.0 / 6f64.sqrt()), (153, 1.0 / 6f64.sqrt())],
        );
        // customer -> 57(-), invoice -> 240(+), amount -> 105(-)
        assert_sparse(&embed("customer invoice amount"), &[(57, -third), (105, -third), (240, third)]);
    }

    #[test]
    fn repeated_single_token_normalizes_away() {
        assert_eq!(embed("users users"), embed("users"));
    }

    #[test]
    fn empty_text_rejected() {
        let e = OfflineHashEmbedder::default();
        assert_eq!(e.embed(""), Err(EmbedError::EmptyText));
        assert_eq!(e.embed("  ,;-- "), Err(EmbedError::EmptyText));
    }

    #[test]
    fn cosine_identities() {
        let v = embed("orders by customer");
        assert!((cosine(&v, &v).unwrap() - 1.0).abs() < 1e-6);
        let mut a = vec![0.0; 4];
        let mut b = vec![0.0; 4];
        a[0] = 1.0;
        b[1] = 1.0;
        let (a, b) = (EmbeddingVector::normalized(&a).unwrap(), EmbeddingVector::normalized(&b).unwrap());
        assert_eq!(cosine(&a, &b).unwrap(), 0.0);
        let short = EmbeddingVector::normalized(&[1.0, 0.0]).unwrap();
        assert!(matches!(cosine(&a, &short), Err(EmbedError::DimensionMismatch { .. })));
    }

    #[test]
    fn cosine_matches_scratch_dot_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let raw_a: Vec<f64> = (0..256).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let raw_b: Vec<f64> = (0..256).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let a = EmbeddingVector::normalized(&raw_a).unwrap();
        let b = EmbeddingVector::normalized(&raw_b).unwrap();
        // oracle: cosine of the raw vectors, computed from scratch in f64
        let dot: f64 = raw_a.iter().zip(&raw_b).map(|(x, y)| x * y).sum();
        let na: f64 = raw_a.iter().map(|x| x * x).sum::<f64>().sqrt();
        let nb: f64 = raw_b.iter().map(|x| x * x).sum::<f64>().sqrt();
        assert!((cosine(&a, &b).unwrap() - dot / (na * nb)).abs() < 1e-6);
    }

    #[test]
    fn centroid_is_normalized_mean() {
        let a = embed("alpha");
        let b = embed("beta gamma");
        let c = EmbeddingVector::centroid([&a, &b]).unwrap();
        let mean: Vec<f64> = a
            .values()
            .iter()
            .zip(b.values())
            .map(|(x, y)| (f64::from(*x) + f64::from(*y)) / 2.0)
            .collect();
        let expected = EmbeddingVector::normalized(&mean).unwrap();
        for (x, y) in c.values().iter().zip(expected.values()) {
            assert!((x - y).abs() < 1e-6);
        }
    }

    proptest! {
        #[test]
        fn unit_norm(text in "[a-zA-Z0-9 _,.]{0,80}") {
            if let Ok(v) = OfflineHashEmbedder::default().embed(&text) {
                prop_assert!((v.norm() - 1.0).abs() < 1e-6);
            }
        }

        #[test]
        fn token_permutation_and_duplication_invariance(tokens in prop::collection::vec("[a-z]{1,8}", 1..10)) {
            let forward = tokens.join(" ");
            let mut rev = tokens.clone();
            rev.reverse();
            let e = OfflineHashEmbedder::default();
            match e.embed(&forward) {
                Ok(v) => {
                    prop_assert_eq!(&v, &e.embed(&rev.join(" ")).unwrap());
                    prop_assert_eq!(&v, &e.embed(&format!("{forward} {forward}")).unwrap());
                }
                Err(err) => prop_assert_eq!(err, EmbedError::ZeroVector),
            }
        }
    }
}
