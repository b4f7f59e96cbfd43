use std::cell::RefCell;

use super::*;
use crate::cluster::{ClusteringStrategy, SphericalKMeans};
use crate::embed::{Embedder, OfflineHashEmbedder};
use crate::gateway::ModelGateway;
use crate::index::corpus::random_unit_vectors;
use crate::ingest::{parse_ddl, ParseOptions};
use crate::profile::ProfileSet;

const WORDS: [&str; 8] = ["users", "orders", "invoices", "products", "payments", "shipments", "reviews", "accounts"];

fn table_nodes(count: usize, seed: u64) -> Vec<CatalogNode> {
    random_unit_vectors(seed, count, 24)
        .into_iter()
        .enumerate()
        .map(|(i, v)| CatalogNode {
            node_id: format!("tbl_{i:04}"),
            kind: NodeKind::Table,
            label: format!("{}_{i}", WORDS[i % WORDS.len()]),
            summary_text: format!("Table {} number {i}.", WORDS[i % WORDS.len()]),
            embedding: v,
            children: Vec::new(),
            parent: None,
            level: TABLE_LEVEL,
            member_leaf_count: 1 + (i as u64 % 3),
        })
        .collect()
}

fn build(leaves: Vec<CatalogNode>, config: &HierarchyConfig, gateway: &ModelGateway) -> Forest {
    let embedder = OfflineHashEmbedder::default();
    let services = BuildServices {
        clusterer: &SphericalKMeans,
        gateway,
        embedder: &embedder,
    };
    build_hierarchy(leaves, config, &services, &[], &mut NoSink).unwrap()
}

fn layer_sizes(f: &Forest) -> Vec<usize> {
    f.meta().layer_sizes.clone()
}

#[test]
fn small_frontier_is_returned_unchanged() {
    let gw = ModelGateway::offline();
    let leaves = table_nodes(5, 1);
    let forest = build(leaves.clone(), &HierarchyConfig::default(), &gw);
    assert_eq!(forest.roots().len(), 5);
    assert!(forest.nodes().all(|n| n.kind == NodeKind::Table));
    assert_eq!(gw.stats().provider_attempts, 0);
    assert_eq!(forest.node("tbl_0003"), Some(&leaves[3]));
}

#[test]
fn sixty_four_leaves_make_one_layer_of_twelve() {
    // c = max(12, ceil(64 / 8)) = 12, and 12 <= K stops the loop.
    let gw = ModelGateway::offline();
    let config = HierarchyConfig {
        seed: 1,
        ..HierarchyConfig::default()
    };
    let forest = build(table_nodes(64, 2), &config, &gw);
    assert_eq!(layer_sizes(&forest), vec![0, 64, 12]);
    assert_eq!(forest.roots().len(), 12);
    assert!(forest.roots().iter().all(|r| r.level == 2 && r.kind == NodeKind::Category));
    for table in forest.get_layer(TABLE_LEVEL) {
        let tops: Vec<_> = forest.roots().into_iter().filter(|r| r.children.contains(&table.node_id)).collect();
        assert_eq!(tops.len(), 1);
    }
    let total: u64 = (0..64).map(|i| 1 + (i % 3)).sum();
    assert_eq!(forest.meta().leaf_count, total);
}

#[test]
fn thousand_leaves_follow_layer_arithmetic() {
    // 1000 -> max(12,125)=125 -> max(12,16)=16 -> max(12,2)=12.
    let gw = ModelGateway::offline();
    let forest = build(table_nodes(1000, 3), &HierarchyConfig::default(), &gw);
    assert_eq!(layer_sizes(&forest), vec![0, 1000, 125, 16, 12]);
    forest.check().unwrap();
}

#[test]
fn input_order_does_not_change_forest() {
    let gw = ModelGateway::offline();
    let leaves = table_nodes(200, 4);
    let mut shuffled = leaves.clone();
    shuffled.reverse();
    shuffled.swap(3, 150);
    let a = build(leaves, &HierarchyConfig::default(), &gw);
    let b = build(shuffled, &HierarchyConfig::default(), &ModelGateway::offline());
    assert_eq!(a, b);
    let (da, db) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    a.save(da.path()).unwrap();
    b.save(db.path()).unwrap();
    for f in ["nodes.jsonl", "forest.json"] {
        assert_eq!(std::fs::read(da.path().join(f)).unwrap(), std::fs::read(db.path().join(f)).unwrap());
    }
}

#[test]
fn category_embeddings_are_child_centroids() {
    let forest = build(table_nodes(150, 5), &HierarchyConfig::default(), &ModelGateway::offline());
    for cat in forest.nodes().filter(|n| n.kind == NodeKind::Category) {
        let children = forest.children_of(&cat.node_id).unwrap();
        let mut mean = vec![0.0f64; cat.embedding.dim()];
        for c in &children {
            for (m, v) in mean.iter_mut().zip(c.embedding.values()) {
                *m += f64::from(*v);
            }
        }
        let norm = mean.iter().map(|x| x * x).sum::<f64>().sqrt();
        for (m, v) in mean.iter().zip(cat.embedding.values()) {
            assert!((m / norm - f64::from(*v)).abs() < 1e-6);
        }
        let words = cat.label.split_whitespace().count();
        assert!((1..=6).contains(&words));
        assert_eq!(cat.member_leaf_count, children.iter().map(|c| c.member_leaf_count).sum::<u64>());
    }
}

#[test]
fn degenerate_embeddings_form_a_single_category() {
    let mut leaves = table_nodes(20, 6);
    let same = leaves[0].embedding.clone();
    leaves.iter_mut().for_each(|l| l.embedding = same.clone());
    let forest = build(leaves, &HierarchyConfig::default(), &ModelGateway::offline());
    assert_eq!(layer_sizes(&forest), vec![0, 20, 1]);
}

#[test]
fn config_validation() {
    let bad_k = HierarchyConfig { k: 0, ..HierarchyConfig::default() };
    let bad_b = HierarchyConfig { branching: 1, ..HierarchyConfig::default() };
    assert!(bad_k.validate().is_err());
    assert!(bad_b.validate().is_err());
    assert_eq!(HierarchyConfig::default().target_clusters(13), 12);
    assert_eq!(HierarchyConfig::default().target_clusters(200), 25);
}

struct Scripted(Vec<Vec<usize>>);

impl ClusteringStrategy for Scripted {
    fn name(&self) -> &str {
        "scripted"
    }
    fn cluster(&self, _: &[(&str, &EmbeddingVector)], _: usize, _: u64, _: usize) -> Result<Vec<Vec<usize>>, ClusterError> {
        Ok(self.0.clone())
    }
}

#[test]
fn clustering_contract_is_enforced() {
    let gw = ModelGateway::offline();
    let embedder = OfflineHashEmbedder::default();
    let config = HierarchyConfig { k: 2, ..HierarchyConfig::default() };
    let run = |groups: Vec<Vec<usize>>| {
        let strategy = Scripted(groups);
        let services = BuildServices {
            clusterer: &strategy,
            gateway: &gw,
            embedder: &embedder,
        };
        build_hierarchy(table_nodes(4, 7), &config, &services, &[], &mut NoSink)
    };
    let violation = |r: Result<Forest, HierarchyError>| matches!(r, Err(HierarchyError::ContractViolation(_)));
    assert!(violation(run(vec![vec![0, 1], vec![1, 2, 3]])));
    assert!(violation(run(vec![vec![0, 1]])));
    assert!(violation(run(vec![vec![0], vec![1], vec![2, 3]])));
    assert!(violation(run(vec![vec![0, 9], vec![1, 2, 3]])));
    // empty groups are dropped, members may arrive unordered
    let forest = run(vec![vec![3, 0], vec![], vec![2, 1]]).unwrap();
    assert_eq!(forest.roots().len(), 2);
}

#[test]
fn interrupted_build_resumes_from_last_layer() {
    let config = HierarchyConfig::default();
    let leaves = table_nodes(1000, 8);
    let embedder = OfflineHashEmbedder::default();
    let reference = build(leaves.clone(), &config, &ModelGateway::offline());

    let saved: RefCell<Vec<Vec<CatalogNode>>> = RefCell::new(Vec::new());
    let gw = ModelGateway::offline();
    let services = BuildServices {
        clusterer: &SphericalKMeans,
        gateway: &gw,
        embedder: &embedder,
    };
    let mut failing_sink = |level: u32, nodes: &[CatalogNode]| {
        if level == 3 {
            return Err(HierarchyError::Invariant("simulated crash".into()));
        }
        saved.borrow_mut().push(nodes.to_vec());
        Ok(())
    };
    assert!(build_hierarchy(leaves.clone(), &config, &services, &[], &mut failing_sink).is_err());
    let saved = saved.into_inner();
    assert_eq!(saved.len(), 1);
    assert_eq!(saved[0].len(), 125);

    let fresh = ModelGateway::offline();
    let services = BuildServices {
        clusterer: &SphericalKMeans,
        gateway: &fresh,
        embedder: &embedder,
    };
    let resumed = build_hierarchy(leaves, &config, &services, &saved, &mut NoSink).unwrap();
    assert_eq!(resumed, reference);
    // only layers 3 and 4 were named again
    assert_eq!(fresh.stats().provider_attempts, 16 + 12);
}

#[test]
fn navigation_over_a_real_catalog() {
    let ddl = "CREATE TABLE users (id INT, email TEXT, name TEXT); CREATE TABLE orders (id INT, user_id INT);";
    let mut cat = crate::ingest::PhysicalCatalog::new();
    cat.add_source(parse_ddl(ddl.as_bytes(), "shop", &ParseOptions::new("shop.sql")).unwrap(), None)
        .unwrap();
    let gw = ModelGateway::offline();
    let profiles = ProfileSet::build(&cat, &gw, None);
    let embedder = OfflineHashEmbedder::default();
    let leaves = leaf_nodes(&cat, &profiles, &embedder).unwrap();
    assert_eq!(leaves.len(), 7);
    let users = crate::ids::table_id("shop", "users");
    let users_node = leaves.iter().find(|n| n.node_id == users).unwrap();
    assert_eq!(users_node.embedding, embedder.embed(&profiles.tables[&users].summary_text).unwrap());

    let forest = build(leaves, &HierarchyConfig::default(), &gw);
    let names: Vec<_> = forest.children_of(&users).unwrap().iter().map(|c| c.label.clone()).collect();
    assert_eq!(names, ["id", "email", "name"]);
    let email = cat.resolve_column_path("shop.users.email").unwrap();
    assert!(forest.children_of(&email.column_id).unwrap().is_empty());
    assert_eq!(forest.ancestors(&email.column_id)[0].node_id, users);
    assert!(matches!(forest.children_of("nope"), Err(HierarchyError::UnknownNode(_))));
    let top: Vec<_> = forest.get_layer(forest.top_level()).into_iter().map(|n| n.node_id.clone()).collect();
    let roots: Vec<_> = forest.roots().into_iter().map(|n| n.node_id.clone()).collect();
    assert_eq!(top, roots);
    assert_eq!(forest.meta().leaf_count, 5);

    let dir = tempfile::tempdir().unwrap();
    forest.save(dir.path()).unwrap();
    assert_eq!(Forest::load(dir.path()).unwrap(), forest);
}
