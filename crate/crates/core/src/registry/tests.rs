use std::sync::Arc;

use serde_json::json;

use super::*;
use crate::cluster::ClusteringStrategy;
use crate::index::corpus::random_unit_vectors;

fn points(n: usize) -> Vec<contract::Point> {
    random_unit_vectors(21, n, 8)
        .into_iter()
        .enumerate()
        .map(|(i, v)| contract::Point {
            id: format!("p{i:02}"),
            vector: v.values().to_vec(),
        })
        .collect()
}

#[test]
fn defaults_have_one_active_builtin_per_kind() {
    let r = Registry::in_memory();
    let names: Vec<_> = r.list().into_iter().map(|d| (d.kind, d.name, d.active)).collect();
    assert_eq!(
        names,
        [
            (StrategyKind::Clustering, "spherical-kmeans".to_string(), true),
            (StrategyKind::Embedding, "offline-hash".to_string(), true),
            (StrategyKind::Relation, "cosine-top-m".to_string(), true),
        ]
    );
}

#[test]
fn registering_a_builtin_twice_is_a_duplicate() {
    let r = Registry::in_memory();
    let err = r
        .register(StrategyDescriptor::builtin(StrategyKind::Clustering, "spherical-kmeans"))
        .unwrap_err();
    assert!(matches!(err, RegistryError::DuplicateName { .. }));
    // same name under another kind is a different strategy
    let alias = StrategyDescriptor {
        name: "kmeans-alias".into(),
        ..StrategyDescriptor::builtin(StrategyKind::Clustering, "spherical-kmeans")
    };
    assert!(!r.register(alias).unwrap().active);
    assert!(matches!(
        r.register(StrategyDescriptor::builtin(StrategyKind::Relation, "nope")),
        Err(RegistryError::HandshakeFailed(_))
    ));
}

#[test]
fn missing_executable_fails_handshake() {
    let r = Registry::in_memory();
    let d = StrategyDescriptor::external(StrategyKind::Clustering, "ghost", "/nonexistent/plugin");
    assert!(matches!(r.register(d), Err(RegistryError::HandshakeFailed(_))));
}

#[test]
fn builtin_clustering_is_routed_transparently() {
    let r = Registry::in_memory();
    let pts = points(10);
    let req = json!({ "points": pts, "c": 2, "seed": 4, "max_iters": 20 });
    let via_registry: contract::ClusterResponse =
        serde_json::from_value(r.invoke(StrategyKind::Clustering, req).unwrap()).unwrap();

    let vectors: Vec<EmbeddingVector> = pts.iter().map(|p| EmbeddingVector::from_raw(p.vector.clone())).collect();
    let direct_points: Vec<(&str, &EmbeddingVector)> = pts.iter().zip(&vectors).map(|(p, v)| (p.id.as_str(), v)).collect();
    let direct = spherical_kmeans(&direct_points, 2, 4, 20).unwrap();
    let mut direct_ids: Vec<Vec<String>> = direct
        .into_iter()
        .map(|g| {
            let mut ids: Vec<String> = g.into_iter().map(|i| pts[i].id.clone()).collect();
            ids.sort();
            ids
        })
        .collect();
    direct_ids.sort();
    assert_eq!(via_registry.groups, direct_ids);

    let adapter = StrategyClusterer::active(Arc::new(Registry::in_memory())).unwrap();
    let by_adapter = adapter.cluster(&direct_points, 2, 4, 20).unwrap();
    let mut by_adapter: Vec<Vec<usize>> = by_adapter.into_iter().map(|mut g| { g.sort(); g }).collect();
    by_adapter.sort();
    let mut expected = spherical_kmeans(&direct_points, 2, 4, 20).unwrap();
    expected.iter_mut().for_each(|g| g.sort());
    expected.sort();
    assert_eq!(by_adapter, expected);
}

#[test]
fn builtin_embedding_matches_offline_embedder() {
    let r = Registry::in_memory().with_embedding_dim(32);
    let out = r.invoke(StrategyKind::Embedding, json!({ "texts": ["user email", "orders"] })).unwrap();
    let resp: contract::EmbedResponse = serde_json::from_value(out).unwrap();
    let e = OfflineHashEmbedder::new(32);
    assert_eq!(resp.vectors[0], e.embed("user email").unwrap().values());
    assert_eq!(resp.vectors[1], e.embed("orders").unwrap().values());
}

#[test]
fn builtin_relation_is_cosine_top_m() {
    let pts = points(12);
    let req = contract::RelateRequest {
        node: pts[0].clone(),
        candidates: pts[1..].to_vec(),
        m: 3,
        threshold: -1.0,
    };
    let resp = Registry::in_memory().relate(BUILTIN_RELATION, &req).unwrap();
    let node = EmbeddingVector::from_raw(pts[0].vector.clone());
    let mut brute: Vec<(f64, String)> = pts[1..]
        .iter()
        .map(|p| (node.dot(&EmbeddingVector::from_raw(p.vector.clone())), p.id.clone()))
        .collect();
    brute.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());
    let got: Vec<&str> = resp.pairs.iter().map(|p| p.id.as_str()).collect();
    let want: Vec<&str> = brute.iter().take(3).map(|(_, id)| id.as_str()).collect();
    assert_eq!(got, want);
}

#[test]
fn invalid_payload_is_rejected() {
    let r = Registry::in_memory();
    assert!(matches!(
        r.invoke(StrategyKind::Clustering, json!({ "nope": 1 })),
        Err(RegistryError::InvalidPayload(_))
    ));
}

#[test]
fn activation_persists_and_keeps_one_active() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("strategies.json");
    {
        let r = Registry::open(&path).unwrap();
        let alias = StrategyDescriptor {
            name: "kmeans-b".into(),
            ..StrategyDescriptor::builtin(StrategyKind::Clustering, "spherical-kmeans")
        };
        r.register(alias).unwrap();
        r.activate(StrategyKind::Clustering, "kmeans-b").unwrap();
        assert!(matches!(
            r.activate(StrategyKind::Clustering, "missing"),
            Err(RegistryError::UnknownStrategy { .. })
        ));
    }
    let r = Registry::open(&path).unwrap();
    assert_eq!(r.active(StrategyKind::Clustering).unwrap().name, "kmeans-b");
    let active: Vec<_> = r.list().into_iter().filter(|d| d.active).map(|d| d.name).collect();
    assert_eq!(active, ["kmeans-b", "offline-hash", "cosine-top-m"]);

    std::fs::write(
        &path,
        std::fs::read_to_string(&path).unwrap().replace("\"active\": false", "\"active\": true"),
    )
    .unwrap();
    assert!(matches!(Registry::open(&path), Err(RegistryError::Corrupt(_))));
}
