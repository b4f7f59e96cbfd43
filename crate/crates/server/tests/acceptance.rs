//! Acceptance harness: one PASS/FAIL line per criterion. Run with
//! `cargo test -p lakescope --test acceptance`.

mod common;

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;
use std::process::{Command, Stdio};
use std::sync::Arc;
use std::time::{Duration, Instant};

use lakescope::jobs::JobState;
use lakescope::views::{BuildRequest, ExpandRequest, IngestRequest, SearchBody, StrategyRegistration};
use lakescope::{Service, ServiceError, ServiceOptions};
use lakescope_core::embed::{EmbedderDescriptor, EmbeddingVector, OfflineHashEmbedder, Embedder};
use lakescope_core::gateway::ModelGateway;
use lakescope_core::hierarchy::{CatalogNode, Forest, HierarchyConfig};
use lakescope_core::index::corpus::{clustered_unit_vectors, random_unit_vectors, SplitMix64};
use lakescope_core::index::NodeKind;
use lakescope_core::ingest::PhysicalCatalog;
use lakescope_core::registry::StrategyKind;
use lakescope_core::relation::{analyze_expansion, detect_joinable, ColumnView, ExpansionContext, RelationCache, RelationKind, RelationServices};

use common::{fixtures, requests, wrapper};

const INGEST_LIMIT: Duration = Duration::from_secs(10);
const BUILD_LIMIT: Duration = Duration::from_secs(60);
const K: usize = 12;
const SEED: u64 = 1;
const MAX_LABEL_WORDS: usize = 6;
const SEARCH_QUERIES: usize = 50;
const SEARCH_N: usize = 10;
const SELF_SCORE_TOL: f64 = 1e-6;
const WEIGHT_TOL: f64 = 1e-4;
const RELATION_M: usize = 5;
const RELATION_TAU: f64 = 0.60;

const ECHO: &str = env!("CARGO_BIN_EXE_lakescope-echo-clusterer");
const DROP: &str = env!("CARGO_BIN_EXE_lakescope-drop-clusterer");
const CLI: &str = env!("CARGO_BIN_EXE_lakescope");

// Unreachable endpoints: any attempt to use them would fail the build.
const BOGUS_LLM: &str = "http://192.0.2.1:9/v1";
const BOGUS_EMBED: &str = "http://192.0.2.1:9/embed";

type Outcome = Result<String, String>;
type Check<'a> = (&'static str, Box<dyn Fn() -> Outcome + 'a>);

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if let false = $cond {
            return Err(format!($($msg)+));
        }
    };
}

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn open(dir: &Path, k: Option<usize>) -> Arc<Service> {
    let mut options = ServiceOptions::new(dir).offline();
    options.k = k;
    options.seed = Some(SEED);
    Service::open(options).expect("open store")
}

fn manifest(name: &str) -> serde_json::Value {
    let text = std::fs::read_to_string(fixtures().join(name).join("manifest.json")).expect("manifest");
    serde_json::from_str(&text).expect("manifest json")
}

fn shuffled(mut items: Vec<IngestRequest>, seed: u64) -> Vec<IngestRequest> {
    let mut rng = SplitMix64::new(seed);
    for i in (1..items.len()).rev() {
        let j = (rng.next_u64() % (i as u64 + 1)) as usize;
        items.swap(i, j);
    }
    items
}

fn register(svc: &Service, name: &str, exec: &Path) -> Result<(), ServiceError> {
    svc.register_strategy(StrategyRegistration {
        kind: StrategyKind::Clustering,
        name: name.into(),
        exec: Some(exec.display().to_string()),
        builtin: None,
        activate: true,
    })
    .map(|_| ())
}

fn search_body(text: &str, n: usize) -> SearchBody {
    serde_json::from_value(serde_json::json!({ "query_text": text, "n": n })).expect("search body")
}

/// Shared corpus store: ingested once, built once.
struct Corpus {
    _dir: tempfile::TempDir,
    svc: Arc<Service>,
    ingest_time: Duration,
    accounted: usize,
    build: Result<(lakescope::jobs::BuildJob, Duration), String>,
}

fn corpus() -> Corpus {
    let dir = tempfile::tempdir().expect("tempdir");
    let svc = open(dir.path(), Some(K));
    let started = Instant::now();
    let out = svc.ingest(requests("corpus")).expect("corpus ingest");
    let ingest_time = started.elapsed();
    let accounted = out.sources.iter().map(|s| s.tables + s.diagnostics.len()).sum();
    let started = Instant::now();
    let build = svc.build(BuildRequest::default()).map(|j| (j, started.elapsed())).map_err(err);
    Corpus {
        _dir: dir,
        svc,
        ingest_time,
        accounted,
        build,
    }
}

fn ingestion_scale(c: &Corpus) -> Outcome {
    let statements = manifest("corpus")["statements"].as_u64().unwrap_or(0) as usize;
    ensure!(statements >= 1000, "fixture has only {statements} statements");
    let (_, tables, columns) = c.svc.catalog().counts();
    ensure!(
        c.accounted >= statements,
        "tables + diagnostics = {} < {statements} statements",
        c.accounted
    );
    ensure!(c.ingest_time < INGEST_LIMIT, "ingest took {:?}", c.ingest_time);
    Ok(format!(
        "{statements} statements -> {tables} tables, {columns} columns, {} accounted, {:.2}s",
        c.accounted,
        c.ingest_time.as_secs_f64()
    ))
}

fn hierarchy_invariants(c: &Corpus) -> Outcome {
    let (job, took) = c.build.clone()?;
    let snap = c.svc.snapshot().map_err(err)?;
    let forest = &snap.forest;
    let config = &forest.meta().config;
    ensure!(config.k == K && config.branching == 8 && config.seed == SEED, "unexpected config {config:?}");
    forest.check().map_err(err)?;

    let roots = forest.roots();
    ensure!(roots.len() <= K, "{} roots > K={K}", roots.len());

    // every column reached from exactly one root
    let mut reached: BTreeMap<&str, usize> = BTreeMap::new();
    for root in &roots {
        let mut stack = vec![root.node_id.as_str()];
        while let Some(id) = stack.pop() {
            let node = forest.node(id).ok_or(format!("dangling child {id}"))?;
            if node.kind == NodeKind::Column {
                *reached.entry(id).or_default() += 1;
            }
            stack.extend(node.children.iter().map(String::as_str));
        }
    }
    let catalog = c.svc.catalog();
    let columns: BTreeSet<&str> = catalog.columns().map(|col| col.column_id.as_str()).collect();
    ensure!(reached.len() == columns.len(), "{} of {} columns reachable", reached.len(), columns.len());
    ensure!(reached.values().all(|&n| n == 1), "a column is reachable from more than one root");
    ensure!(reached.keys().all(|id| columns.contains(id)), "forest has columns missing from the catalog");

    for node in forest.nodes() {
        let expected = match node.kind {
            NodeKind::Column => 1,
            NodeKind::Table => node.children.len() as u64,
            NodeKind::Category => node
                .children
                .iter()
                .map(|ch| forest.node(ch).map_or(0, |n| n.member_leaf_count))
                .sum(),
        };
        ensure!(
            node.member_leaf_count == expected,
            "{}: member_leaf_count {} != {expected}",
            node.node_id,
            node.member_leaf_count
        );
        if node.kind == NodeKind::Category {
            let words = node.label.split_whitespace().count();
            ensure!(
                (1..=MAX_LABEL_WORDS).contains(&words),
                "{}: label {:?} has {words} words",
                node.node_id,
                node.label
            );
        }
    }
    let sizes = &job.frontier_sizes;
    ensure!(sizes.windows(2).all(|w| w[1] < w[0]), "frontier not strictly decreasing: {sizes:?}");
    ensure!(took < BUILD_LIMIT, "build took {took:?}");
    Ok(format!(
        "{} roots, layers {sizes:?}, {} columns, build {:.2}s",
        roots.len(),
        reached.len(),
        took.as_secs_f64()
    ))
}

fn forest_bytes(svc: &Service) -> Result<Vec<(String, Vec<u8>)>, String> {
    let version = svc.snapshot().map_err(err)?.version();
    let dir = svc.data_dir().join("forests").join(format!("v{version}"));
    ["nodes.jsonl", "forest.json", "index.lsvi"]
        .iter()
        .map(|f| std::fs::read(dir.join(f)).map(|b| (f.to_string(), b)).map_err(err))
        .collect()
}

fn top_labels(svc: &Service) -> Result<BTreeSet<String>, String> {
    Ok(svc.root().map_err(err)?.nodes.into_iter().map(|n| n.label).collect())
}

fn determinism(c: &Corpus) -> Outcome {
    c.build.clone()?;
    let reference = forest_bytes(&c.svc)?;
    let labels = top_labels(&c.svc)?;
    for seed in [7, 8] {
        let dir = tempfile::tempdir().map_err(err)?;
        let svc = open(dir.path(), Some(K));
        svc.ingest(shuffled(requests("corpus"), seed)).map_err(err)?;
        svc.build(BuildRequest::default()).map_err(err)?;
        for ((name, a), (_, b)) in reference.iter().zip(forest_bytes(&svc)?) {
            ensure!(*a == b, "shuffle seed {seed}: {name} differs");
        }
        ensure!(top_labels(&svc)? == labels, "shuffle seed {seed}: top-layer labels differ");
    }
    Ok(format!("2 shuffled rebuilds byte-identical, {} top labels", labels.len()))
}

fn brute_force(entries: &[(String, EmbeddingVector)], q: &EmbeddingVector, n: usize) -> Vec<(String, f64)> {
    let mut scored: Vec<(String, f64)> = entries.iter().map(|(id, v)| (id.clone(), q.dot(v))).collect();
    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    scored.truncate(n);
    scored
}

fn search_oracle(c: &Corpus) -> Outcome {
    c.build.clone()?;
    let snap = c.svc.snapshot().map_err(err)?;
    let embedder = OfflineHashEmbedder::new(snap.index.dim());
    let searchable: Vec<(String, EmbeddingVector)> = snap
        .index
        .entries()
        .into_iter()
        .filter(|e| e.visible_in_search && e.node_kind != NodeKind::Category)
        .map(|e| (e.node_id, e.vector))
        .collect();
    ensure!(snap.index.len() >= 10_000, "index holds only {} vectors", snap.index.len());

    let mut vocab: BTreeSet<String> = BTreeSet::new();
    for col in c.svc.catalog().columns() {
        vocab.extend(col.name.split('_').filter(|t| t.len() > 2).map(str::to_string));
    }
    let vocab: Vec<String> = vocab.into_iter().collect();
    let mut rng = SplitMix64::new(50);
    for i in 0..SEARCH_QUERIES {
        let words = 1 + (rng.next_u64() % 3) as usize;
        let text: Vec<&str> = (0..words).map(|_| vocab[(rng.next_u64() as usize) % vocab.len()].as_str()).collect();
        let text = text.join(" ");
        let got = c.svc.search(search_body(&text, SEARCH_N)).map_err(err)?;
        let q = embedder.embed(&got.response.rephrased_query).map_err(err)?;
        let want = brute_force(&searchable, &q, SEARCH_N);
        let got_ids: Vec<&str> = got.response.hits.iter().map(|h| h.node_id.as_str()).collect();
        let want_ids: Vec<&str> = want.iter().map(|(id, _)| id.as_str()).collect();
        ensure!(got_ids == want_ids, "query {i} {text:?}: {got_ids:?} != {want_ids:?}");
        for (h, (_, s)) in got.response.hits.iter().zip(&want) {
            ensure!((h.score - s).abs() <= SELF_SCORE_TOL, "query {i}: score {} vs {s}", h.score);
        }
    }

    // self-retrieval over nodes whose summary text is unique
    let mut by_summary: BTreeMap<&str, Vec<&CatalogNode>> = BTreeMap::new();
    for node in snap.forest.nodes().filter(|n| n.kind != NodeKind::Category) {
        by_summary.entry(node.summary_text.as_str()).or_default().push(node);
    }
    let unique: Vec<&CatalogNode> = by_summary.values().filter(|v| v.len() == 1).map(|v| v[0]).collect();
    ensure!(unique.len() >= SEARCH_QUERIES, "only {} nodes with a unique summary", unique.len());
    for _ in 0..SEARCH_QUERIES {
        let node = unique[(rng.next_u64() as usize) % unique.len()];
        let q = embedder.embed(&node.summary_text).map_err(err)?;
        let hits = snap
            .index
            .top_n(&q, 1, &lakescope_core::index::SearchFilter::default())
            .map_err(err)?;
        let top = hits.first().ok_or("self-retrieval returned nothing")?;
        ensure!(top.node_id == node.node_id, "{} retrieved {} first", node.node_id, top.node_id);
        ensure!((top.score - 1.0).abs() <= SELF_SCORE_TOL, "{}: self score {}", node.node_id, top.score);
    }
    Ok(format!(
        "{SEARCH_QUERIES} queries match brute force over {} vectors; {SEARCH_QUERIES} self-retrievals at rank 1",
        snap.index.len()
    ))
}

fn synthetic_node(id: &str, kind: NodeKind, level: u32, v: EmbeddingVector) -> CatalogNode {
    CatalogNode {
        node_id: id.into(),
        kind,
        label: id.into(),
        summary_text: format!("summary of {id}"),
        embedding: v,
        children: Vec::new(),
        parent: None,
        level,
        member_leaf_count: 1,
    }
}

/// `cat_p` holding `tbl_new`, plus 50 root tables as candidates.
fn expansion_forest(vecs: &[EmbeddingVector]) -> Forest {
    let mut new = synthetic_node("tbl_new", NodeKind::Table, 1, vecs[50].clone());
    new.parent = Some("cat_p".into());
    let mut parent = synthetic_node("cat_p", NodeKind::Category, 2, vecs[50].clone());
    parent.children = vec!["tbl_new".into()];
    let mut nodes = vec![new, parent];
    for (i, v) in vecs[..50].iter().enumerate() {
        nodes.push(synthetic_node(&format!("tbl_v{i:02}"), NodeKind::Table, 1, v.clone()));
    }
    let dim = vecs[0].values().len();
    Forest::from_nodes(HierarchyConfig::default(), EmbedderDescriptor::offline(dim), nodes).expect("forest")
}

fn expand_synthetic(vecs: &[EmbeddingVector], threshold: f64) -> Result<Vec<(String, f64)>, String> {
    let forest = expansion_forest(vecs);
    let catalog = PhysicalCatalog::new();
    let gateway = ModelGateway::offline();
    let cache = RelationCache::in_memory(1);
    let mut visible: Vec<String> = (0..50).map(|i| format!("tbl_v{i:02}")).collect();
    visible.push("cat_p".into());
    let mut ctx = ExpansionContext::new("cat_p", vec!["tbl_new".into()], visible);
    ctx.m = RELATION_M;
    ctx.threshold = threshold;
    let services = RelationServices {
        forest: &forest,
        catalog: &catalog,
        gateway: &gateway,
        cache: &cache,
        scorer: None,
    };
    let result = analyze_expansion(&ctx, &services).map_err(err)?;
    Ok(result
        .edges
        .into_iter()
        .filter(|e| e.relation_kind == RelationKind::Semantic)
        .map(|e| (e.to_node, e.weight))
        .collect())
}

fn same_edges(got: &[(String, f64)], want: &[(String, f64)]) -> bool {
    got.len() == want.len()
        && got
            .iter()
            .zip(want)
            .all(|((a, x), (b, y))| a == b && (x - y).abs() <= WEIGHT_TOL)
}

fn relation_analysis(small: &Arc<Service>) -> Outcome {
    // frozen from an independent full-sort computation
    let frozen: Vec<(String, f64)> = [
        ("tbl_v06", 0.3889),
        ("tbl_v07", 0.3783),
        ("tbl_v14", 0.3123),
        ("tbl_v18", 0.2436),
        ("tbl_v00", 0.2329),
    ]
    .iter()
    .map(|(id, w)| (id.to_string(), *w))
    .collect();
    let got = expand_synthetic(&random_unit_vectors(9, 51, 32), -1.0)?;
    ensure!(same_edges(&got, &frozen), "seed 9: {got:?} != {frozen:?}");

    let vecs = clustered_unit_vectors(11, 51, 32, 4, 0.35);
    let got = expand_synthetic(&vecs, RELATION_TAU)?;
    let mut want: Vec<(String, f64)> = (0..50).map(|i| (format!("tbl_v{i:02}"), vecs[50].dot(&vecs[i]))).collect();
    want.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    want.truncate(RELATION_M);
    want.retain(|(_, w)| *w >= RELATION_TAU);
    ensure!(!want.is_empty(), "oracle produced no edge above tau");
    ensure!(same_edges(&got, &want), "tau {RELATION_TAU}: {got:?} != {want:?}");

    // joinable pair on the shop fixture, through the expand endpoint
    let catalog = small.catalog();
    let col = |path: &str| catalog.resolve_column_path(path).map(|c| c.column_id.clone()).ok_or(format!("no column {path}"));
    let users_id = col("shop.users.id")?;
    let orders_user_id = col("shop.orders.user_id")?;
    let users_email = col("shop.users.email")?;
    let orders_created = col("shop.orders.created_at")?;
    let users_table = catalog.column(&users_id).map(|c| c.table_id.clone()).ok_or("users table")?;
    let orders_table = catalog.column(&orders_user_id).map(|c| c.table_id.clone()).ok_or("orders table")?;
    let visible: Vec<String> = catalog.table_columns(&orders_table).iter().map(|c| c.column_id.clone()).collect();
    let expanded = small
        .expand(
            &users_table,
            ExpandRequest {
                visible_nodes: Some(visible),
                m: Some(RELATION_M),
                threshold: Some(RELATION_TAU),
            },
        )
        .map_err(err)?;
    let joins: BTreeSet<(String, String)> = expanded
        .edges
        .iter()
        .filter(|e| e.relation_kind == RelationKind::Joinable)
        .map(|e| (e.from_node.clone(), e.to_node.clone()))
        .collect();
    ensure!(
        joins.contains(&(users_id.clone(), orders_user_id.clone())),
        "users.id ~ orders.user_id not flagged; joins: {joins:?}"
    );
    ensure!(
        !joins.contains(&(users_email.clone(), orders_created.clone())),
        "users.email ~ orders.created_at flagged through expand"
    );
    let view = |id: &str| ColumnView::from_catalog(&catalog, id).ok_or(format!("no view for {id}"));
    ensure!(detect_joinable(&view(&users_id)?, &view(&orders_user_id)?).is_some(), "detector rejects users.id/orders.user_id");
    ensure!(detect_joinable(&view(&users_email)?, &view(&orders_created)?).is_none(), "detector accepts email/created_at");
    Ok(format!("frozen seed-9 top-5 and tau={RELATION_TAU} brute force match; {} joinable edges on users", joins.len()))
}

fn strategy_registry() -> Outcome {
    let dir = tempfile::tempdir().map_err(err)?;
    let svc = open(dir.path(), None);
    svc.ingest(requests("small")).map_err(err)?;
    svc.build(BuildRequest::default()).map_err(err)?;

    register(&svc, "echo", Path::new(ECHO)).map_err(err)?;
    let job = svc.build(BuildRequest::default()).map_err(err)?;
    ensure!(job.state == JobState::Done, "echo build ended {:?}", job.state);
    let snap = svc.snapshot().map_err(err)?;
    ensure!(snap.record.built_with.clustering_strategy == "echo", "forest not built with echo");
    snap.forest.check().map_err(err)?;
    let version = snap.version();
    let before = serde_json::to_value(svc.search(search_body("payroll", 5)).map_err(err)?).map_err(err)?;

    register(&svc, "drop", Path::new(DROP)).map_err(err)?;
    match svc.build(BuildRequest::default()) {
        Err(ServiceError::ContractViolation(_)) => {}
        other => return Err(format!("drop plugin build returned {other:?}")),
    }
    let failed = svc.list_jobs().map_err(err)?.jobs.into_iter().next_back().ok_or("no jobs")?;
    ensure!(
        failed.state == JobState::Failed && failed.error_code.as_deref() == Some("contract_violation"),
        "last job {:?} {:?}",
        failed.state,
        failed.error_code
    );
    ensure!(svc.snapshot().map_err(err)?.version() == version, "forest version moved");
    let after = serde_json::to_value(svc.search(search_body("payroll", 5)).map_err(err)?).map_err(err)?;
    ensure!(before == after, "queries changed after the failed build");
    // a restarted service still serves the same version
    drop(svc);
    let svc = open(dir.path(), None);
    ensure!(svc.snapshot().map_err(err)?.version() == version, "version lost after restart");
    Ok(format!("echo built v{version}; drop aborted with contract_violation; v{version} still served"))
}

fn wait_for(path: &Path, limit: Duration) -> bool {
    let deadline = Instant::now() + limit;
    while Instant::now() < deadline {
        if path.exists() {
            return true;
        }
        std::thread::sleep(Duration::from_millis(10));
    }
    false
}

fn crash_safety() -> Outcome {
    let tmp = tempfile::tempdir().map_err(err)?;
    let data = tmp.path().join("data");
    let slow = wrapper(tmp.path(), "slow-echo", ECHO, &[(lakescope::plugin_support::DELAY_ENV, "1500")]);

    let svc = open(&data, Some(2));
    svc.ingest(requests("small")).map_err(err)?;
    svc.build(BuildRequest::default()).map_err(err)?;
    register(&svc, "slow-echo", &slow).map_err(err)?;
    let before = serde_json::to_value(svc.root().map_err(err)?).map_err(err)?;
    drop(svc);

    let mut child = Command::new(CLI)
        .arg("--data-dir")
        .arg(&data)
        .args(["--offline", "--k", "2", "--seed", "1", "build"])
        .stdout(Stdio::null())
        .stderr(Stdio::null())
        .spawn()
        .map_err(err)?;
    let jobs = data.join("jobs").join("job-000002");
    let reached = wait_for(&jobs.join("layer-2.jsonl"), Duration::from_secs(60));
    let finished = jobs.join("layer-3.jsonl").exists();
    child.kill().map_err(err)?;
    child.wait().map_err(err)?;
    ensure!(reached, "layer-2 was never persisted");
    ensure!(!finished, "build got past layer 3 before the kill");

    let svc = open(&data, Some(2));
    let after = serde_json::to_value(svc.root().map_err(err)?).map_err(err)?;
    ensure!(before == after, "previous forest changed after the crash");
    svc.search(search_body("employee", 5)).map_err(err)?;
    let crashed = svc.job("job-000002").map_err(err)?;
    ensure!(crashed.state == JobState::Failed, "crashed job is {:?}", crashed.state);
    drop(svc);

    let out = Command::new(CLI)
        .arg("--data-dir")
        .arg(&data)
        .args(["--offline", "--k", "2", "--seed", "1", "--json", "build", "--resume"])
        .output()
        .map_err(err)?;
    ensure!(out.status.success(), "resume failed: {}", String::from_utf8_lossy(&out.stderr));
    let resumed: serde_json::Value = serde_json::from_slice(&out.stdout).map_err(err)?;
    let reused = resumed["layers_reused"].as_u64().unwrap_or(0);
    ensure!(reused >= 1, "resume reused {reused} layers");
    ensure!(resumed["resumed_from"] == "job-000002", "resumed_from = {}", resumed["resumed_from"]);

    // a fresh build with the same plugin and config gives the same forest
    let fresh_dir = tmp.path().join("fresh");
    let fresh = open(&fresh_dir, Some(2));
    fresh.ingest(requests("small")).map_err(err)?;
    register(&fresh, "slow-echo", &wrapper(tmp.path(), "fast-echo", ECHO, &[])).map_err(err)?;
    fresh.build(BuildRequest::default()).map_err(err)?;
    let svc = open(&data, Some(2));
    let (a, b) = (forest_bytes(&svc)?, forest_bytes(&fresh)?);
    ensure!(a[0] == b[0] && a[1] == b[1], "resumed forest differs from a fresh build");
    Ok(format!("killed after layer 2; v1 intact; resume reused {reused} layer(s) and matches a fresh build"))
}

fn offline_guarantee(svc: &Service) -> Outcome {
    ensure!(std::env::var("LAKESCOPE_LLM_ENDPOINT").as_deref() == Ok(BOGUS_LLM), "bogus endpoint not set");
    let health = svc.health().map_err(err)?;
    let provider = serde_json::to_value(health.provider).map_err(err)?;
    ensure!(provider == "offline", "provider is {provider}");
    let embedder = health.embedder.ok_or("no embedder reported")?;
    let kind = serde_json::to_value(embedder.kind).map_err(err)?;
    ensure!(kind == "offline_hash", "embedder kind {kind}");
    Ok(format!("provider offline, embedder {} dim {}, endpoints configured but unused", embedder.name, embedder.dim))
}

fn main() {
    // Every stage must work with endpoints configured but unreachable.
    std::env::set_var("LAKESCOPE_LLM_ENDPOINT", BOGUS_LLM);
    std::env::set_var("LAKESCOPE_EMBED_ENDPOINT", BOGUS_EMBED);
    std::env::set_var("LAKESCOPE_PLUGIN_TIMEOUT_SECS", "30");

    let corpus = corpus();
    let small_dir = tempfile::tempdir().expect("tempdir");
    let small = open(small_dir.path(), None);
    small.ingest(requests("small")).expect("small ingest");
    let small_build = small.build(BuildRequest::default()).map(|_| ()).map_err(err);

    let checks: Vec<Check<'_>> = vec![
        ("ingestion scale", Box::new(|| ingestion_scale(&corpus))),
        ("hierarchy invariants", Box::new(|| hierarchy_invariants(&corpus))),
        ("determinism", Box::new(|| determinism(&corpus))),
        ("search oracle equivalence", Box::new(|| search_oracle(&corpus))),
        ("relation analysis", Box::new(|| small_build.clone().and_then(|_| relation_analysis(&small)))),
        ("strategy registry", Box::new(strategy_registry)),
        ("crash safety", Box::new(crash_safety)),
        ("offline-only guarantee", Box::new(|| offline_guarantee(&corpus.svc))),
    ];
    let mut failed = 0;
    for (name, check) in checks {
        match check() {
            Ok(detail) => println!("PASS {name}: {detail}"),
            Err(reason) => {
                failed += 1;
                println!("FAIL {name}: {reason}");
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
