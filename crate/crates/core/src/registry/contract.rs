//! Request/response payloads per strategy kind and their validation.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::RegistryError;

/// Allowed deviation of an embedding's L2 norm from 1.
pub const UNIT_NORM_TOLERANCE: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub id: String,
    pub vector: Vec<f32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterRequest {
    pub points: Vec<Point>,
    pub c: usize,
    pub seed: u64,
    pub max_iters: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterResponse {
    pub groups: Vec<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbedRequest {
    pub texts: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbedResponse {
    pub vectors: Vec<Vec<f32>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelateRequest {
    pub node: Point,
    /// Ranked by cosine, best first.
    pub candidates: Vec<Point>,
    pub m: usize,
    pub threshold: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredPair {
    pub id: String,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelateResponse {
    pub pairs: Vec<ScoredPair>,
}

fn violation<T>(msg: String) -> Result<T, RegistryError> {
    Err(RegistryError::ContractViolation(msg))
}

/// Drops empty groups, then requires 1..=c groups that together contain every
/// input id exactly once. Groups come back sorted internally and by first id.
pub fn validate_partition(req: &ClusterRequest, mut resp: ClusterResponse) -> Result<ClusterResponse, RegistryError> {
    resp.groups.retain(|g| !g.is_empty());
    if resp.groups.is_empty() || resp.groups.len() > req.c {
        return violation(format!("expected 1..={} groups, got {}", req.c, resp.groups.len()));
    }
    let mut seen: BTreeMap<&str, bool> = req.points.iter().map(|p| (p.id.as_str(), false)).collect();
    for g in &resp.groups {
        for id in g {
            match seen.get_mut(id.as_str()) {
                None => return violation(format!("partition contains unknown id {id}")),
                Some(true) => return violation(format!("id {id} assigned twice")),
                Some(s) => *s = true,
            }
        }
    }
    if let Some((missing, _)) = seen.iter().find(|(_, s)| !**s) {
        return violation(format!("partition misses input id {missing}"));
    }
    for g in &mut resp.groups {
        g.sort();
    }
    resp.groups.sort();
    Ok(resp)
}

pub fn validate_embeddings(req: &EmbedRequest, resp: EmbedResponse, dim: usize) -> Result<EmbedResponse, RegistryError> {
    if resp.vectors.len() != req.texts.len() {
        return violation(format!("expected {} vectors, got {}", req.texts.len(), resp.vectors.len()));
    }
    for (i, v) in resp.vectors.iter().enumerate() {
        if v.len() != dim {
            return violation(format!("vector {i} has dimension {}, declared {dim}", v.len()));
        }
        let norm = v.iter().map(|&x| f64::from(x) * f64::from(x)).sum::<f64>().sqrt();
        if !norm.is_finite() || (norm - 1.0).abs() > UNIT_NORM_TOLERANCE {
            return violation(format!("vector {i} is not unit length (norm {norm})"));
        }
    }
    Ok(resp)
}

pub fn validate_pairs(req: &RelateRequest, resp: RelateResponse) -> Result<RelateResponse, RegistryError> {
    if resp.pairs.len() > req.m {
        return violation(format!("expected at most {} pairs, got {}", req.m, resp.pairs.len()));
    }
    let candidates: BTreeSet<&str> = req.candidates.iter().map(|p| p.id.as_str()).collect();
    let mut seen = BTreeSet::new();
    for p in &resp.pairs {
        if !candidates.contains(p.id.as_str()) {
            return violation(format!("pair refers to non-candidate {}", p.id));
        }
        if !seen.insert(p.id.as_str()) {
            return violation(format!("pair {} listed twice", p.id));
        }
        if !p.score.is_finite() || !(-1.0..=1.0).contains(&p.score) {
            return violation(format!("score {} for {} outside [-1, 1]", p.score, p.id));
        }
    }
    Ok(resp)
}
