use rayon::prelude::*;

use super::{
    CatalogNode, CategoryEmbedding, Forest, HierarchyConfig, HierarchyError, COLUMN_LEVEL, FIRST_CATEGORY_LEVEL,
    TABLE_LEVEL,
};
use crate::cluster::{ClusterError, ClusteringStrategy};
use crate::embed::{Embedder, EmbeddingVector};
use crate::gateway::{Bindings, ModelGateway, TemplateId};
use crate::ids::category_id;
use crate::index::NodeKind;
use crate::ingest::PhysicalCatalog;
use crate::profile::ProfileSet;

/// Member summaries passed to the naming prompt, and their length cap.
const NAMING_SUMMARIES: usize = 16;
const NAMING_SUMMARY_CHARS: usize = 160;
/// Member labels echoed in a category's summary text.
const SUMMARY_LABELS: usize = 8;

pub struct BuildServices<'a> {
    pub clusterer: &'a dyn ClusteringStrategy,
    pub gateway: &'a ModelGateway,
    pub embedder: &'a dyn Embedder,
}

/// Receives each category layer once it is complete, before the next starts.
pub trait LayerSink {
    fn layer_done(&mut self, level: u32, nodes: &[CatalogNode]) -> Result<(), HierarchyError>;
}

pub struct NoSink;

impl LayerSink for NoSink {
    fn layer_done(&mut self, _: u32, _: &[CatalogNode]) -> Result<(), HierarchyError> {
        Ok(())
    }
}

impl<F: FnMut(u32, &[CatalogNode]) -> Result<(), HierarchyError>> LayerSink for F {
    fn layer_done(&mut self, level: u32, nodes: &[CatalogNode]) -> Result<(), HierarchyError> {
        self(level, nodes)
    }
}

/// Column and table nodes with embeddings of their profile summaries.
/// Tables without columns are left out.
pub fn leaf_nodes(
    catalog: &PhysicalCatalog,
    profiles: &ProfileSet,
    embedder: &dyn Embedder,
) -> Result<Vec<CatalogNode>, HierarchyError> {
    let mut nodes = Vec::new();
    for table in catalog.tables().filter(|t| !t.columns.is_empty()) {
        let summary = |id: &str| {
            profiles
                .summary(id)
                .map(str::to_string)
                .ok_or_else(|| HierarchyError::MissingProfile(id.to_string()))
        };
        for col_id in &table.columns {
            let col = catalog
                .column(col_id)
                .ok_or_else(|| HierarchyError::UnknownNode(col_id.clone()))?;
            nodes.push(CatalogNode {
                node_id: col_id.clone(),
                kind: NodeKind::Column,
                label: col.name.clone(),
                summary_text: summary(col_id)?,
                embedding: EmbeddingVector::from_raw(Vec::new()),
                children: Vec::new(),
                parent: Some(table.table_id.clone()),
                level: COLUMN_LEVEL,
                member_leaf_count: 1,
            });
        }
        nodes.push(CatalogNode {
            node_id: table.table_id.clone(),
            kind: NodeKind::Table,
            label: table.name.clone(),
            summary_text: summary(&table.table_id)?,
            embedding: EmbeddingVector::from_raw(Vec::new()),
            children: table.columns.clone(),
            parent: None,
            level: TABLE_LEVEL,
            member_leaf_count: table.columns.len() as u64,
        });
    }
    let embeddings: Result<Vec<EmbeddingVector>, HierarchyError> = nodes
        .par_iter()
        .map(|n| {
            embedder
                .embed(&n.summary_text)
                .or_else(|_| embedder.embed(&format!("{} {}", n.label, n.summary_text)))
                .map_err(HierarchyError::from)
        })
        .collect();
    for (n, e) in nodes.iter_mut().zip(embeddings?) {
        n.embedding = e;
    }
    Ok(nodes)
}

/// Builds the full forest: columns stay under their tables and the table
/// layer is the first frontier that gets clustered.
pub fn build_hierarchy(
    leaves: Vec<CatalogNode>,
    config: &HierarchyConfig,
    services: &BuildServices<'_>,
    resume: &[Vec<CatalogNode>],
    sink: &mut dyn LayerSink,
) -> Result<Forest, HierarchyError> {
    config.validate()?;
    let (tables, columns): (Vec<CatalogNode>, Vec<CatalogNode>) =
        leaves.into_iter().partition(|n| n.level == TABLE_LEVEL);
    let layers = abstract_frontier(tables, FIRST_CATEGORY_LEVEL, config, services, resume, sink)?;
    Forest::from_nodes(
        config.clone(),
        services.embedder.descriptor().clone(),
        columns.into_iter().chain(layers.into_iter().flatten()),
    )
}

/// Repeatedly clusters `frontier` until at most K nodes remain. Returns every
/// layer, starting with the (now parented) input frontier.
///
/// `resume` holds previously completed category layers; a stored layer is
/// reused when its children exactly cover the current frontier.
pub fn abstract_frontier(
    mut frontier: Vec<CatalogNode>,
    base_level: u32,
    config: &HierarchyConfig,
    services: &BuildServices<'_>,
    resume: &[Vec<CatalogNode>],
    sink: &mut dyn LayerSink,
) -> Result<Vec<Vec<CatalogNode>>, HierarchyError> {
    config.validate()?;
    if frontier.is_empty() {
        return Err(HierarchyError::EmptyFrontier);
    }
    frontier.sort_by(|a, b| a.node_id.cmp(&b.node_id));
    let mut layers = vec![frontier];
    let mut level = base_level;
    let mut resumable = true;

    while layers.last().expect("non-empty").len() > config.k {
        let current = layers.last().expect("non-empty");
        let stored = resume
            .get(layers.len() - 1)
            .filter(|stored| resumable && covers(stored, current, level));
        let mut next = match stored {
            Some(stored) => stored.clone(),
            None => {
                resumable = false;
                let next = form_layer(current, level, config, services)?;
                sink.layer_done(level, &next)?;
                next
            }
        };
        next.sort_by(|a, b| a.node_id.cmp(&b.node_id));
        next.iter_mut().for_each(|n| n.parent = None);
        let current = layers.last_mut().expect("non-empty");
        for parent in &next {
            for child in &parent.children {
                let pos = current
                    .binary_search_by(|n| n.node_id.as_str().cmp(child))
                    .map_err(|_| HierarchyError::UnknownNode(child.clone()))?;
                current[pos].parent = Some(parent.node_id.clone());
            }
        }
        layers.push(next);
        level += 1;
    }
    Ok(layers)
}

fn covers(stored: &[CatalogNode], frontier: &[CatalogNode], level: u32) -> bool {
    let mut children: Vec<&str> = stored
        .iter()
        .flat_map(|n| n.children.iter().map(String::as_str))
        .collect();
    children.sort_unstable();
    stored.iter().all(|n| n.level == level && n.kind == NodeKind::Category)
        && children.len() == frontier.len()
        && children.iter().zip(frontier).all(|(c, n)| *c == n.node_id)
}

fn form_layer(
    frontier: &[CatalogNode],
    level: u32,
    config: &HierarchyConfig,
    services: &BuildServices<'_>,
) -> Result<Vec<CatalogNode>, HierarchyError> {
    let n = frontier.len();
    let c = config.target_clusters(n);
    let first = &frontier[0].embedding;
    let groups = if frontier.iter().all(|f| f.embedding == *first) {
        // degenerate embeddings: one category holds everything
        vec![(0..n).collect()]
    } else {
        let points: Vec<(&str, &EmbeddingVector)> =
            frontier.iter().map(|f| (f.node_id.as_str(), &f.embedding)).collect();
        let groups = services
            .clusterer
            .cluster(&points, c, config.seed, config.max_kmeans_iters)
            .map_err(|e| match e {
                ClusterError::ContractViolation(m) => HierarchyError::ContractViolation(m),
                e => e.into(),
            })?;
        validate_partition(groups, n, c)?
    };

    let members: Vec<Vec<&CatalogNode>> = groups
        .iter()
        .map(|g| g.iter().map(|&i| &frontier[i]).collect())
        .collect();
    members
        .par_iter()
        .map(|m| make_category(m, level, config, services))
        .collect()
}

/// Checks that `groups` partitions `0..n` into between 1 and `c` non-empty
/// groups, then orders members ascending and groups by first member.
fn validate_partition(mut groups: Vec<Vec<usize>>, n: usize, c: usize) -> Result<Vec<Vec<usize>>, HierarchyError> {
    let violation = |m: String| Err(HierarchyError::ContractViolation(m));
    groups.retain(|g| !g.is_empty());
    if groups.is_empty() || groups.len() > c {
        return violation(format!("expected 1..={c} groups, got {}", groups.len()));
    }
    let mut seen = vec![false; n];
    for g in &mut groups {
        for &i in g.iter() {
            if i >= n {
                return violation(format!("member index {i} out of range"));
            }
            if std::mem::replace(&mut seen[i], true) {
                return violation(format!("member {i} assigned twice"));
            }
        }
        g.sort_unstable();
    }
    if let Some(missing) = seen.iter().position(|s| !s) {
        return violation(format!("member {missing} not assigned"));
    }
    groups.sort_by_key(|g| g[0]);
    Ok(groups)
}

fn truncate_chars(s: &str, max: usize) -> String {
    if s.chars().count() <= max {
        s.to_string()
    } else {
        format!("{}…", s.chars().take(max).collect::<String>())
    }
}

fn make_category(
    members: &[&CatalogNode],
    level: u32,
    config: &HierarchyConfig,
    services: &BuildServices<'_>,
) -> Result<CatalogNode, HierarchyError> {
    let labels: Vec<&str> = members.iter().map(|m| m.label.as_str()).collect();
    let summaries: Vec<String> = members
        .iter()
        .take(NAMING_SUMMARIES)
        .map(|m| format!("- {}", truncate_chars(&m.summary_text, NAMING_SUMMARY_CHARS)))
        .collect();
    let mut b = Bindings::new();
    b.insert("labels".into(), labels.join("\n"));
    b.insert("summaries".into(), summaries.join("\n"));
    let label = services.gateway.complete(TemplateId::NameCategory, &b)?.text;

    let centroid = EmbeddingVector::centroid(members.iter().map(|m| &m.embedding))
        .unwrap_or_else(|_| members[0].embedding.clone());
    let embedding = match config.category_embedding {
        CategoryEmbedding::Centroid => centroid,
        CategoryEmbedding::Phrase => services.embedder.embed(&label).unwrap_or(centroid),
    };

    let mut shown = labels.iter().take(SUMMARY_LABELS).copied().collect::<Vec<_>>().join(", ");
    if labels.len() > SUMMARY_LABELS {
        shown.push_str(&format!(", +{} more", labels.len() - SUMMARY_LABELS));
    }
    let children: Vec<String> = members.iter().map(|m| m.node_id.clone()).collect();
    Ok(CatalogNode {
        node_id: category_id(level, &children),
        kind: NodeKind::Category,
        summary_text: format!("{label}: {shown}"),
        label,
        embedding,
        member_leaf_count: members.iter().map(|m| m.member_leaf_count).sum(),
        children,
        parent: None,
        level,
    })
}
