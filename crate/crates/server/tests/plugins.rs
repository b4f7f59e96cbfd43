mod common;

use std::time::Duration;

use lakescope::jobs::JobState;
use lakescope::views::{SearchBody, StrategyRegistration};
use lakescope::ServiceError;
use lakescope_core::registry::contract::{ClusterRequest, Point};
use lakescope_core::registry::{Registry, RegistryError, StrategyDescriptor, StrategyKind};

use common::{small_store, wrapper};

const ECHO: &str = env!("CARGO_BIN_EXE_lakescope-echo-clusterer");
const DROP: &str = env!("CARGO_BIN_EXE_lakescope-drop-clusterer");
const HASH: &str = env!("CARGO_BIN_EXE_lakescope-hash-embedder");

fn points(n: usize) -> ClusterRequest {
    let points = (0..n)
        .map(|i| {
            let mut vector = vec![0.0f32; 4];
            vector[i % 4] = 1.0;
            Point { id: format!("p{i}"), vector }
        })
        .collect();
    ClusterRequest { points, c: n, seed: 0, max_iters: 10 }
}

fn register(kind: StrategyKind, name: &str, exec: &str, activate: bool) -> StrategyRegistration {
    StrategyRegistration {
        kind,
        name: name.into(),
        exec: Some(exec.into()),
        builtin: None,
        activate,
    }
}

fn search(text: &str) -> SearchBody {
    serde_json::from_value(serde_json::json!({ "query_text": text, "n": 3 })).unwrap()
}

#[test]
fn echo_registers_inactive_and_splits_into_singletons() {
    let registry = Registry::in_memory();
    let d = registry
        .register(StrategyDescriptor::external(StrategyKind::Clustering, "echo", ECHO))
        .unwrap();
    assert!(!d.active);
    assert_eq!(d.declared_contract_version, lakescope_core::registry::CONTRACT_VERSION);

    let resp = registry.cluster("echo", &points(5)).unwrap();
    assert_eq!(resp.groups.len(), 5);
    assert!(resp.groups.iter().all(|g| g.len() == 1));

    let mut req = points(7);
    req.c = 3;
    let sizes: Vec<usize> = registry.cluster("echo", &req).unwrap().groups.iter().map(Vec::len).collect();
    assert_eq!(sizes, [3, 2, 2]);
}

#[test]
fn wrong_kind_is_rejected_at_registration() {
    let registry = Registry::in_memory();
    let err = registry
        .register(StrategyDescriptor::external(StrategyKind::Clustering, "hash", HASH))
        .unwrap_err();
    assert_eq!(
        err,
        RegistryError::KindMismatch {
            expected: StrategyKind::Clustering,
            declared: StrategyKind::Embedding
        }
    );
    assert!(registry.get(StrategyKind::Clustering, "hash").is_err());

    let err = registry
        .register(StrategyDescriptor::external(StrategyKind::Clustering, "missing", "/no/such/plugin"))
        .unwrap_err();
    assert!(matches!(err, RegistryError::HandshakeFailed(_)));
}

#[test]
fn dropped_id_is_a_contract_violation() {
    let registry = Registry::in_memory();
    registry
        .register(StrategyDescriptor::external(StrategyKind::Clustering, "drop", DROP))
        .unwrap();
    let err = registry.cluster("drop", &points(6)).unwrap_err();
    assert!(matches!(err, RegistryError::ContractViolation(_)), "{err:?}");
}

#[test]
fn slow_plugin_times_out() {
    let dir = tempfile::tempdir().unwrap();
    let slow = wrapper(dir.path(), "slow-echo", ECHO, &[(lakescope::plugin_support::DELAY_ENV, "2000")]);
    let registry = Registry::in_memory().with_timeout(Duration::from_millis(300));
    registry
        .register(StrategyDescriptor::external(StrategyKind::Clustering, "slow", &slow))
        .unwrap();
    let err = registry.cluster("slow", &points(4)).unwrap_err();
    assert!(matches!(err, RegistryError::PluginTimeout(_)), "{err:?}");
    // the killed process is replaced on the next call
    let err = registry.cluster("slow", &points(4)).unwrap_err();
    assert!(matches!(err, RegistryError::PluginTimeout(_)), "{err:?}");
}

#[test]
fn echo_plugin_drives_a_build() {
    let dir = tempfile::tempdir().unwrap();
    let svc = small_store(dir.path());
    let d = svc.register_strategy(register(StrategyKind::Clustering, "echo", ECHO, true)).unwrap();
    assert!(d.active);
    let job = svc.build(Default::default()).unwrap();
    assert_eq!(job.state, JobState::Done);
    let snap = svc.snapshot().unwrap();
    assert_eq!(snap.record.built_with.clustering_strategy, "echo");
    assert!(snap.forest.roots().len() <= svc.config().hierarchy.k);
    snap.forest.check().unwrap();
    // query-time fresh hierarchies use the same plugin
    let body = serde_json::from_value(serde_json::json!({
        "query_text": "employee salary", "n": 6, "mode": "fresh_hierarchy"
    }))
    .unwrap();
    let out = svc.search(body).unwrap();
    assert!(out.response.result_forest.is_some());
}

#[test]
fn contract_violation_fails_the_job_and_keeps_the_previous_forest() {
    let dir = tempfile::tempdir().unwrap();
    let svc = small_store(dir.path());
    svc.build(Default::default()).unwrap();
    let before = svc.search(search("order total")).unwrap();

    svc.register_strategy(register(StrategyKind::Clustering, "drop", DROP, true)).unwrap();
    let err = svc.build(Default::default()).unwrap_err();
    assert!(matches!(err, ServiceError::ContractViolation(_)), "{err:?}");
    let job = svc.list_jobs().unwrap().jobs.into_iter().find(|j| j.job_id == "job-000002").unwrap();
    assert_eq!(job.state, JobState::Failed);
    assert_eq!(job.error_code.as_deref(), Some("contract_violation"));

    let after = svc.search(search("order total")).unwrap();
    assert_eq!(after.forest_version, 1);
    assert_eq!(serde_json::to_value(&before).unwrap(), serde_json::to_value(&after).unwrap());
}

#[test]
fn embedding_plugin_drives_build_and_queries() {
    let dir = tempfile::tempdir().unwrap();
    let svc = small_store(dir.path());
    let d = svc.register_strategy(register(StrategyKind::Embedding, "hash64", HASH, true)).unwrap();
    assert_eq!(d.declared_dim, Some(64));
    svc.build(Default::default()).unwrap();
    let snap = svc.snapshot().unwrap();
    assert_eq!(snap.record.built_with.embedder.dim, 64);
    assert_eq!(snap.record.built_with.embedder.name, "hash64");
    let out = svc.search(search("warehouse route")).unwrap();
    assert_eq!(out.response.hits.len(), 3);
    let health = svc.health().unwrap();
    assert_eq!(health.embedder.unwrap().dim, 64);
}
