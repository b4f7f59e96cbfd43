//! Seeded spherical k-means, the default clustering strategy.
//!
//! Points are processed in ascending id order so the result depends only on
//! the (id, vector) set, the cluster count and the seed, never on input order.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::embed::EmbeddingVector;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ClusterError {
    #[error("invalid cluster count {requested} for {points} point(s)")]
    InvalidClusterCount { requested: usize, points: usize },
    #[error("points have mixed dimensions")]
    DimensionMismatch,
    #[error("clustering strategy failed: {0}")]
    Strategy(String),
    #[error("clustering contract violated: {0}")]
    ContractViolation(String),
}

/// A pluggable partitioner. Implementations return groups of indices into
/// `points`; callers validate the partition.
pub trait ClusteringStrategy: Send + Sync {
    fn name(&self) -> &str;
    fn cluster(
        &self,
        points: &[(&str, &EmbeddingVector)],
        c: usize,
        seed: u64,
        max_iters: usize,
    ) -> Result<Vec<Vec<usize>>, ClusterError>;
}

pub struct SphericalKMeans;

impl ClusteringStrategy for SphericalKMeans {
    fn name(&self) -> &str {
        "spherical-kmeans"
    }

    fn cluster(
        &self,
        points: &[(&str, &EmbeddingVector)],
        c: usize,
        seed: u64,
        max_iters: usize,
    ) -> Result<Vec<Vec<usize>>, ClusterError> {
        spherical_kmeans(points, c, seed, max_iters)
    }
}

/// Partitions `points` into exactly `c` non-empty groups.
///
/// Each group lists indices into `points`, ordered by id; groups are ordered
/// by their smallest id.
pub fn spherical_kmeans(
    points: &[(&str, &EmbeddingVector)],
    c: usize,
    seed: u64,
    max_iters: usize,
) -> Result<Vec<Vec<usize>>, ClusterError> {
    let n = points.len();
    if c == 0 || c > n {
        return Err(ClusterError::InvalidClusterCount { requested: c, points: n });
    }
    let dim = points[0].1.dim();
    if points.iter().any(|(_, v)| v.dim() != dim) {
        return Err(ClusterError::DimensionMismatch);
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| points[a].0.cmp(points[b].0));
    let data: Vec<Vec<f64>> = order
        .iter()
        .map(|&i| points[i].1.values().iter().map(|&x| f64::from(x)).collect())
        .collect();

    let assignment = if c == n {
        (0..n).collect()
    } else {
        let mut centroids = seed_centroids(&data, c, seed);
        let mut assignment = assign(&data, &centroids);
        repair_empty(&data, &centroids, &mut assignment, c);
        for _ in 0..max_iters {
            centroids = update_centroids(&data, &assignment, c, &centroids);
            let mut next = assign(&data, &centroids);
            repair_empty(&data, &centroids, &mut next, c);
            if next == assignment {
                break;
            }
            assignment = next;
        }
        assignment
    };

    let mut groups: Vec<Vec<usize>> = vec![Vec::new(); c];
    for (pos, &cluster) in assignment.iter().enumerate() {
        groups[cluster].push(order[pos]);
    }
    // members are already in id order; order groups by their first id
    groups.sort_by(|a, b| points[a[0]].0.cmp(points[b[0]].0));
    Ok(groups)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// k-means++ seeding with distance `1 - cos`.
fn seed_centroids(data: &[Vec<f64>], c: usize, seed: u64) -> Vec<Vec<f64>> {
    let n = data.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut chosen = vec![false; n];
    let first = rng.gen_range(0..n);
    chosen[first] = true;
    let mut centroids = vec![data[first].clone()];
    let mut dist: Vec<f64> = data.iter().map(|x| (1.0 - dot(x, &data[first])).max(0.0)).collect();
    while centroids.len() < c {
        let weights: Vec<f64> = dist
            .iter()
            .zip(&chosen)
            .map(|(d, &taken)| if taken { 0.0 } else { d * d })
            .collect();
        let total: f64 = weights.iter().sum();
        let pick = if total > 0.0 {
            let target = rng.gen::<f64>() * total;
            let mut acc = 0.0;
            let mut pick = None;
            for (i, w) in weights.iter().enumerate() {
                acc += w;
                if *w > 0.0 && acc > target {
                    pick = Some(i);
                    break;
                }
            }
            pick.unwrap_or_else(|| weights.iter().rposition(|w| *w > 0.0).expect("positive total"))
        } else {
            chosen.iter().position(|t| !t).expect("c <= n")
        };
        chosen[pick] = true;
        for (d, x) in dist.iter_mut().zip(data) {
            *d = d.min((1.0 - dot(x, &data[pick])).max(0.0));
        }
        centroids.push(data[pick].clone());
    }
    centroids
}

fn assign(data: &[Vec<f64>], centroids: &[Vec<f64>]) -> Vec<usize> {
    data.iter()
        .map(|x| {
            let mut best = 0;
            let mut best_score = f64::NEG_INFINITY;
            for (k, centroid) in centroids.iter().enumerate() {
                let s = dot(x, centroid);
                if s > best_score {
                    best = k;
                    best_score = s;
                }
            }
            best
        })
        .collect()
}

/// Fills empty clusters by moving the point farthest from its centroid out
/// of the currently largest cluster (ties: lowest cluster index, then lowest
/// id, which is the lowest position because data is id-sorted).
fn repair_empty(data: &[Vec<f64>], centroids: &[Vec<f64>], assignment: &mut [usize], c: usize) {
    let mut sizes = vec![0usize; c];
    for &a in assignment.iter() {
        sizes[a] += 1;
    }
    for empty in 0..c {
        if sizes[empty] > 0 {
            continue;
        }
        let largest = (0..c)
            .max_by(|&a, &b| sizes[a].cmp(&sizes[b]).then(b.cmp(&a)))
            .expect("c >= 1");
        let mut victim = None;
        let mut lowest = f64::INFINITY;
        for (pos, &a) in assignment.iter().enumerate() {
            if a != largest {
                continue;
            }
            let s = dot(&data[pos], &centroids[largest]);
            if s < lowest {
                lowest = s;
                victim = Some(pos);
            }
        }
        let victim = victim.expect("largest cluster has members");
        assignment[victim] = empty;
        sizes[largest] -= 1;
        sizes[empty] += 1;
    }
}

fn update_centroids(
    data: &[Vec<f64>],
    assignment: &[usize],
    c: usize,
    previous: &[Vec<f64>],
) -> Vec<Vec<f64>> {
    let dim = data[0].len();
    let mut sums = vec![vec![0.0; dim]; c];
    let mut first_member: Vec<Option<usize>> = vec![None; c];
    for (pos, &a) in assignment.iter().enumerate() {
        for (s, x) in sums[a].iter_mut().zip(&data[pos]) {
            *s += x;
        }
        first_member[a].get_or_insert(pos);
    }
    sums.into_iter()
        .enumerate()
        .map(|(k, sum)| {
            let norm = dot(&sum, &sum).sqrt();
            if norm > 0.0 {
                sum.iter().map(|x| x / norm).collect()
            } else if let Some(pos) = first_member[k] {
                data[pos].clone()
            } else {
                previous[k].clone()
            }
        })
        .collect()
}
