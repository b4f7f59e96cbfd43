//! Six-facet column profiles and their summarization into one embedding text
//! per column and per table.

use std::collections::BTreeMap;
use std::io;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::gateway::{Bindings, GatewayError, ModelGateway, ProviderKind, TemplateId};
use crate::ids::content_hash;
use crate::ingest::{PhysicalCatalog, ValueSketch};
use crate::jsonl;

pub const SIBLING_CAP: usize = 32;
/// Column summaries included verbatim in a table prompt.
pub const TABLE_PROMPT_MEMBER_CAP: usize = 32;
const SAMPLES_SHOWN: usize = 3;
const SAMPLE_MAX_CHARS: usize = 40;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ProfileError {
    #[error("unknown column {0}")]
    UnknownColumn(String),
    #[error("unknown table {0}")]
    UnknownTable(String),
    #[error("table {0} has no column summaries")]
    EmptyTable(String),
    #[error(transparent)]
    Gateway(#[from] GatewayError),
}

/// The six facets, in prompt order. Only `path` is mandatory.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnFacets {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source_info: Option<String>,
    pub path: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub siblings: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value_characteristics: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub related_tasks: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
}

impl ColumnFacets {
    pub fn new(path: impl Into<String>) -> Self {
        Self {
            path: path.into(),
            ..Self::default()
        }
    }

    /// `(binding name, prompt label, value)` for each present facet, 1..6.
    pub fn present(&self) -> Vec<(&'static str, &'static str, &str)> {
        [
            ("source_info", "Source", self.source_info.as_deref()),
            ("path", "Path", Some(self.path.as_str())),
            ("siblings", "Sibling columns", self.siblings.as_deref()),
            ("value_characteristics", "Values", self.value_characteristics.as_deref()),
            ("related_tasks", "Related tasks", self.related_tasks.as_deref()),
            ("description", "Description", self.description.as_deref()),
        ]
        .into_iter()
        .filter_map(|(k, label, v)| v.filter(|v| !v.trim().is_empty()).map(|v| (k, label, v)))
        .collect()
    }

    pub fn summary_hash(&self) -> String {
        let parts: Vec<String> = self.present().iter().map(|(k, _, v)| format!("{k}={v}")).collect();
        let refs: Vec<&str> = parts.iter().map(String::as_str).collect();
        content_hash(&refs)
    }

    pub fn bindings(&self) -> Bindings {
        let present = self.present();
        let mut b: Bindings = present.iter().map(|(k, _, v)| (k.to_string(), v.to_string())).collect();
        let block: Vec<String> = present.iter().map(|(_, label, v)| format!("{label}: {v}")).collect();
        b.insert("facets".into(), block.join("\n"));
        b
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnProfile {
    pub column_id: String,
    pub facets: ColumnFacets,
    pub summary_text: String,
    pub summary_provider: ProviderKind,
    pub summary_hash: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableProfile {
    pub table_id: String,
    pub member_summaries: Vec<String>,
    pub summary_text: String,
    pub summary_provider: ProviderKind,
}

/// `rows≈R, distinct≈D, nulls=P%, e.g. v1, v2, v3`
pub fn render_value_characteristics(sketch: &ValueSketch) -> String {
    let pct = format!("{:.1}", sketch.null_fraction * 100.0);
    let pct = pct.strip_suffix(".0").unwrap_or(&pct);
    let mut out = format!(
        "rows≈{}, distinct≈{}, nulls={}%",
        sketch.row_count, sketch.distinct_estimate, pct
    );
    let samples: Vec<String> = sketch
        .sample_values
        .iter()
        .take(SAMPLES_SHOWN)
        .map(|s| {
            if s.chars().count() > SAMPLE_MAX_CHARS {
                format!("{}…", s.chars().take(SAMPLE_MAX_CHARS).collect::<String>())
            } else {
                s.clone()
            }
        })
        .collect();
    if !samples.is_empty() {
        out.push_str(", e.g. ");
        out.push_str(&samples.join(", "));
    }
    out
}

/// Comma-joined names, at most `SIBLING_CAP`, then `+N more`.
pub fn render_siblings(names: &[&str]) -> Option<String> {
    if names.is_empty() {
        return None;
    }
    let mut out = names.iter().take(SIBLING_CAP).copied().collect::<Vec<_>>().join(", ");
    if names.len() > SIBLING_CAP {
        out.push_str(&format!(", +{} more", names.len() - SIBLING_CAP));
    }
    Some(out)
}

pub fn build_facets(catalog: &PhysicalCatalog, column_id: &str) -> Result<ColumnFacets, ProfileError> {
    let unknown = || ProfileError::UnknownColumn(column_id.to_string());
    let column = catalog.column(column_id).ok_or_else(unknown)?;
    let table = catalog.table(&column.table_id).ok_or_else(unknown)?;
    let source = catalog.source(&table.source_id).ok_or_else(unknown)?;

    let siblings: Vec<&str> = catalog
        .table_columns(&table.table_id)
        .into_iter()
        .filter(|c| c.column_id != column.column_id)
        .map(|c| c.name.as_str())
        .collect();
    let meta = catalog
        .sidecar(&source.source_id)
        .and_then(|m| m.column(&table.name, &column.name));

    Ok(ColumnFacets {
        source_info: Some(format!("{} ({})", source.name, source.origin_kind())),
        path: format!("{}.{}.{}", source.name, table.name, column.name),
        siblings: render_siblings(&siblings),
        value_characteristics: catalog.sketch(column_id).map(render_value_characteristics),
        related_tasks: meta.and_then(|m| m.tasks.clone()),
        description: meta
            .and_then(|m| m.description.clone())
            .or_else(|| column.comment.clone()),
    })
}

pub fn summarize_profile(gateway: &ModelGateway, facets: &ColumnFacets) -> Result<String, ProfileError> {
    Ok(gateway.complete(TemplateId::SummarizeColumn, &facets.bindings())?.text)
}

pub fn profile_column(
    catalog: &PhysicalCatalog,
    gateway: &ModelGateway,
    column_id: &str,
) -> Result<ColumnProfile, ProfileError> {
    let facets = build_facets(catalog, column_id)?;
    let summary_text = summarize_profile(gateway, &facets)?;
    Ok(ColumnProfile {
        column_id: column_id.to_string(),
        summary_hash: facets.summary_hash(),
        facets,
        summary_text,
        summary_provider: gateway.provider_kind(),
    })
}

/// Summarizes a table from its qualified name, column names and finalized
/// column summaries (one per column, in ordinal order).
pub fn summarize_table(
    gateway: &ModelGateway,
    table: &str,
    column_names: &[&str],
    member_summaries: &[String],
) -> Result<String, ProfileError> {
    if member_summaries.is_empty() {
        return Err(ProfileError::EmptyTable(table.to_string()));
    }
    let mut lines: Vec<String> = member_summaries
        .iter()
        .take(TABLE_PROMPT_MEMBER_CAP)
        .cloned()
        .collect();
    if member_summaries.len() > TABLE_PROMPT_MEMBER_CAP {
        lines.push(format!("(+{} more columns)", member_summaries.len() - TABLE_PROMPT_MEMBER_CAP));
    }
    let mut b = Bindings::new();
    b.insert("table".into(), table.to_string());
    b.insert("columns".into(), render_siblings(column_names).unwrap_or_default());
    b.insert("column_summaries".into(), lines.join("\n"));
    Ok(gateway.complete(TemplateId::SummarizeTable, &b)?.text)
}

/// Profiles of a whole catalog plus the nodes that could not be finalized.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ProfileSet {
    pub columns: BTreeMap<String, ColumnProfile>,
    pub tables: BTreeMap<String, TableProfile>,
    pub failures: Vec<(String, ProfileError)>,
}

impl ProfileSet {
    /// Profiles every column in parallel, then every table whose columns all
    /// succeeded. Profiles in `previous` with an unchanged summary hash are
    /// reused without touching the gateway.
    pub fn build(catalog: &PhysicalCatalog, gateway: &ModelGateway, previous: Option<&ProfileSet>) -> Self {
        let ids: Vec<&str> = catalog.columns().map(|c| c.column_id.as_str()).collect();
        let results: Vec<(String, Result<ColumnProfile, ProfileError>)> = ids
            .par_iter()
            .map(|&id| {
                let result = build_facets(catalog, id).and_then(|facets| {
                    let hash = facets.summary_hash();
                    if let Some(prev) = previous.and_then(|p| p.columns.get(id)).filter(|p| p.summary_hash == hash) {
                        return Ok(prev.clone());
                    }
                    let summary_text = summarize_profile(gateway, &facets)?;
                    Ok(ColumnProfile {
                        column_id: id.to_string(),
                        summary_hash: hash,
                        facets,
                        summary_text,
                        summary_provider: gateway.provider_kind(),
                    })
                });
                (id.to_string(), result)
            })
            .collect();

        let mut set = ProfileSet::default();
        for (id, r) in results {
            match r {
                Ok(p) => {
                    set.columns.insert(id, p);
                }
                Err(e) => set.failures.push((id, e)),
            }
        }

        let tables: Vec<_> = catalog.tables().collect();
        let table_results: Vec<(String, Result<Option<TableProfile>, ProfileError>)> = tables
            .par_iter()
            .map(|t| {
                let members: Option<Vec<&ColumnProfile>> =
                    t.columns.iter().map(|c| set.columns.get(c)).collect();
                let Some(members) = members else {
                    return (t.table_id.clone(), Ok(None));
                };
                let source = catalog.source(&t.source_id).map(|s| s.name.as_str()).unwrap_or_default();
                let names: Vec<&str> = t
                    .columns
                    .iter()
                    .filter_map(|c| catalog.column(c))
                    .map(|c| c.name.as_str())
                    .collect();
                let summaries: Vec<String> = members.iter().map(|m| m.summary_text.clone()).collect();
                let r = summarize_table(gateway, &format!("{source}.{}", t.name), &names, &summaries).map(|text| {
                    Some(TableProfile {
                        table_id: t.table_id.clone(),
                        member_summaries: summaries,
                        summary_text: text,
                        summary_provider: gateway.provider_kind(),
                    })
                });
                (t.table_id.clone(), r)
            })
            .collect();
        for (id, r) in table_results {
            match r {
                Ok(Some(p)) => {
                    set.tables.insert(id, p);
                }
                Ok(None) => {}
                Err(e) => set.failures.push((id, e)),
            }
        }
        set.failures.sort_by(|a, b| a.0.cmp(&b.0));
        set
    }

    pub fn is_complete(&self) -> bool {
        self.failures.is_empty()
    }

    /// Embedding input text of a column or table node.
    pub fn summary(&self, node_id: &str) -> Option<&str> {
        self.columns
            .get(node_id)
            .map(|p| p.summary_text.as_str())
            .or_else(|| self.tables.get(node_id).map(|p| p.summary_text.as_str()))
    }

    pub fn save(&self, dir: &Path) -> io::Result<()> {
        jsonl::write_atomic(&dir.join("columns.jsonl"), self.columns.values())?;
        jsonl::write_atomic(&dir.join("tables.jsonl"), self.tables.values())
    }

    pub fn load(dir: &Path) -> io::Result<Self> {
        let columns: Vec<ColumnProfile> = jsonl::read(&dir.join("columns.jsonl"))?;
        let tables: Vec<TableProfile> = jsonl::read(&dir.join("tables.jsonl"))?;
        Ok(Self {
            columns: columns.into_iter().map(|p| (p.column_id.clone(), p)).collect(),
            tables: tables.into_iter().map(|p| (p.table_id.clone(), p)).collect(),
            failures: Vec::new(),
        })
    }
}
