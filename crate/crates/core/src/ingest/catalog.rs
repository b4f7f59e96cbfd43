//! In-memory physical catalog: sources, tables, columns and their side data.

use std::collections::BTreeMap;
use std::io;
use std::path::Path;

use glob::Pattern;
use serde::{Deserialize, Serialize};

use super::ddl::ParsedSource;
use super::model::{ColumnRecord, ParseDiagnostic, SourceRecord, TableRecord};
use super::sidecar::SidecarMetadata;
use super::sketch::{SketchBuilder, ValueSketch};
use super::IngestError;
use crate::jsonl;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PhysicalCatalog {
    sources: BTreeMap<String, SourceRecord>,
    tables: BTreeMap<String, TableRecord>,
    columns: BTreeMap<String, ColumnRecord>,
    sketches: BTreeMap<String, ValueSketch>,
    sidecars: BTreeMap<String, SidecarMetadata>,
    diagnostics: BTreeMap<String, Vec<ParseDiagnostic>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IngestSummary {
    pub source: SourceRecord,
    pub tables: usize,
    pub columns: usize,
    pub diagnostics: Vec<ParseDiagnostic>,
    /// True when an existing source with the same name and origin was replaced.
    pub replaced: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CatalogQuery {
    /// Glob matched against the table name, the source name, or `source.table`.
    #[serde(default)]
    pub pattern: Option<String>,
    #[serde(default)]
    pub page_size: Option<usize>,
    /// Exclusive lower bound on `table_id` (the previous page's `next_cursor`).
    #[serde(default)]
    pub cursor: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableListing {
    pub table_id: String,
    pub source_id: String,
    pub source_name: String,
    pub name: String,
    pub column_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CatalogPage {
    pub items: Vec<TableListing>,
    pub next_cursor: Option<String>,
    pub total_matching: usize,
}

pub const DEFAULT_PAGE_SIZE: usize = 50;

#[derive(Serialize, Deserialize)]
struct Keyed<T> {
    key: String,
    value: T,
}

impl PhysicalCatalog {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds a parsed source. Re-adding the same (name, origin) replaces it;
    /// the same name from a different origin is rejected so that name-derived
    /// table and column ids stay unique.
    pub fn add_source(
        &mut self,
        parsed: ParsedSource,
        sidecar: Option<SidecarMetadata>,
    ) -> Result<IngestSummary, IngestError> {
        let source_id = parsed.source.source_id.clone();
        if let Some(existing) = self.sources.values().find(|s| s.name == parsed.source.name) {
            if existing.source_id != source_id {
                return Err(IngestError::SourceConflict {
                    name: parsed.source.name.clone(),
                    existing_origin: existing.origin_uri.clone(),
                });
            }
        }
        let replaced = self.remove_source(&source_id);
        let summary = IngestSummary {
            source: parsed.source.clone(),
            tables: parsed.tables.len(),
            columns: parsed.columns.len(),
            diagnostics: parsed.diagnostics.clone(),
            replaced,
        };
        for table in parsed.tables {
            self.tables.insert(table.table_id.clone(), table);
        }
        for column in parsed.columns {
            self.columns.insert(column.column_id.clone(), column);
        }
        if let Some(sidecar) = sidecar {
            self.sidecars.insert(source_id.clone(), sidecar);
        }
        self.diagnostics.insert(source_id.clone(), parsed.diagnostics);
        self.sources.insert(source_id, parsed.source);
        Ok(summary)
    }

    fn remove_source(&mut self, source_id: &str) -> bool {
        if self.sources.remove(source_id).is_none() {
            return false;
        }
        let table_ids: Vec<String> = self
            .tables
            .values()
            .filter(|t| t.source_id == source_id)
            .map(|t| t.table_id.clone())
            .collect();
        for tid in table_ids {
            if let Some(table) = self.tables.remove(&tid) {
                for cid in table.columns {
                    self.columns.remove(&cid);
                    self.sketches.remove(&cid);
                }
            }
        }
        self.sidecars.remove(source_id);
        self.diagnostics.remove(source_id);
        true
    }

    pub fn sources(&self) -> impl Iterator<Item = &SourceRecord> {
        self.sources.values()
    }

    pub fn tables(&self) -> impl Iterator<Item = &TableRecord> {
        self.tables.values()
    }

    pub fn columns(&self) -> impl Iterator<Item = &ColumnRecord> {
        self.columns.values()
    }

    pub fn source(&self, id: &str) -> Option<&SourceRecord> {
        self.sources.get(id)
    }

    pub fn table(&self, id: &str) -> Option<&TableRecord> {
        self.tables.get(id)
    }

    pub fn column(&self, id: &str) -> Option<&ColumnRecord> {
        self.columns.get(id)
    }

    pub fn sketch(&self, column_id: &str) -> Option<&ValueSketch> {
        self.sketches.get(column_id)
    }

    pub fn sidecar(&self, source_id: &str) -> Option<&SidecarMetadata> {
        self.sidecars.get(source_id)
    }

    pub fn diagnostics(&self, source_id: &str) -> &[ParseDiagnostic] {
        self.diagnostics.get(source_id).map_or(&[], Vec::as_slice)
    }

    pub fn source_by_name(&self, name: &str) -> Option<&SourceRecord> {
        self.sources.values().find(|s| s.name == name)
    }

    /// Columns of a table in ordinal order.
    pub fn table_columns(&self, table_id: &str) -> Vec<&ColumnRecord> {
        self.tables
            .get(table_id)
            .map(|t| t.columns.iter().filter_map(|c| self.columns.get(c)).collect())
            .unwrap_or_default()
    }

    /// Resolves `source.table.column` (names, case-insensitive for unquoted).
    pub fn resolve_column_path(&self, path: &str) -> Option<&ColumnRecord> {
        let mut parts = path.splitn(3, '.');
        let (s, t, c) = (parts.next()?, parts.next()?, parts.next()?);
        let source = self.source_by_name(s)?;
        let table = self
            .tables
            .values()
            .find(|tb| tb.source_id == source.source_id && (tb.name == t || tb.name == t.to_lowercase()))?;
        self.table_columns(&table.table_id)
            .into_iter()
            .find(|col| col.name == c || col.name == c.to_lowercase())
    }

    pub fn counts(&self) -> (usize, usize, usize) {
        (self.sources.len(), self.tables.len(), self.columns.len())
    }

    pub fn is_empty(&self) -> bool {
        self.tables.is_empty()
    }

    /// Builds and stores the value sketch of a column from a stream of
    /// literals (`None` = SQL NULL).
    pub fn ingest_value_data<I, S>(&mut self, column_id: &str, rows: I) -> Result<ValueSketch, IngestError>
    where
        I: IntoIterator<Item = Option<S>>,
        S: AsRef<str>,
    {
        let column = self
            .columns
            .get(column_id)
            .ok_or_else(|| IngestError::UnknownColumn(column_id.to_string()))?;
        let mut builder = SketchBuilder::new(column_id, column.declared_type.is_text());
        for row in rows {
            builder.push(row.as_ref().map(AsRef::as_ref));
        }
        let sketch = builder.finish();
        self.sketches.insert(column_id.to_string(), sketch.clone());
        Ok(sketch)
    }

    pub fn list_catalog(&self, query: &CatalogQuery) -> Result<CatalogPage, IngestError> {
        let page_size = query.page_size.unwrap_or(DEFAULT_PAGE_SIZE);
        if page_size == 0 {
            return Err(IngestError::InvalidQuery("page_size must be at least 1".into()));
        }
        let pattern = query
            .pattern
            .as_deref()
            .map(Pattern::new)
            .transpose()
            .map_err(|e| IngestError::InvalidQuery(format!("bad pattern: {e}")))?;
        let matches = |t: &TableRecord| {
            let Some(p) = &pattern else { return true };
            let source = self.sources.get(&t.source_id).map_or("", |s| s.name.as_str());
            p.matches(&t.name) || p.matches(source) || p.matches(&format!("{source}.{}", t.name))
        };
        let matching: Vec<&TableRecord> = self.tables.values().filter(|t| matches(t)).collect();
        let after = query.cursor.as_deref();
        let mut items: Vec<TableListing> = matching
            .iter()
            .filter(|t| after.is_none_or(|c| t.table_id.as_str() > c))
            .take(page_size + 1)
            .map(|t| TableListing {
                table_id: t.table_id.clone(),
                source_id: t.source_id.clone(),
                source_name: self
                    .sources
                    .get(&t.source_id)
                    .map(|s| s.name.clone())
                    .unwrap_or_default(),
                name: t.name.clone(),
                column_count: t.columns.len(),
            })
            .collect();
        let next_cursor = if items.len() > page_size {
            items.truncate(page_size);
            items.last().map(|t| t.table_id.clone())
        } else {
            None
        };
        Ok(CatalogPage {
            items,
            next_cursor,
            total_matching: matching.len(),
        })
    }

    pub fn save(&self, dir: &Path) -> io::Result<()> {
        jsonl::write_atomic(&dir.join("sources.jsonl"), self.sources.values())?;
        jsonl::write_atomic(&dir.join("tables.jsonl"), self.tables.values())?;
        jsonl::write_atomic(&dir.join("columns.jsonl"), self.columns.values())?;
        jsonl::write_atomic(&dir.join("sketches.jsonl"), self.sketches.values())?;
        let sidecars: Vec<Keyed<&SidecarMetadata>> = self
            .sidecars
            .iter()
            .map(|(k, v)| Keyed { key: k.clone(), value: v })
            .collect();
        jsonl::write_atomic(&dir.join("sidecars.jsonl"), &sidecars)?;
        let diags: Vec<Keyed<&Vec<ParseDiagnostic>>> = self
            .diagnostics
            .iter()
            .map(|(k, v)| Keyed { key: k.clone(), value: v })
            .collect();
        jsonl::write_atomic(&dir.join("diagnostics.jsonl"), &diags)
    }

    pub fn load(dir: &Path) -> io::Result<Self> {
        let mut cat = PhysicalCatalog::new();
        for s in jsonl::read::<SourceRecord>(&dir.join("sources.jsonl"))? {
            cat.sources.insert(s.source_id.clone(), s);
        }
        for t in jsonl::read::<TableRecord>(&dir.join("tables.jsonl"))? {
            cat.tables.insert(t.table_id.clone(), t);
        }
        for c in jsonl::read::<ColumnRecord>(&dir.join("columns.jsonl"))? {
            cat.columns.insert(c.column_id.clone(), c);
        }
        for s in jsonl::read::<ValueSketch>(&dir.join("sketches.jsonl"))? {
            cat.sketches.insert(s.column_id.clone(), s);
        }
        for k in jsonl::read::<Keyed<SidecarMetadata>>(&dir.join("sidecars.jsonl"))? {
            cat.sidecars.insert(k.key, k.value);
        }
        for k in jsonl::read::<Keyed<Vec<ParseDiagnostic>>>(&dir.join("diagnostics.jsonl"))? {
            cat.diagnostics.insert(k.key, k.value);
        }
        Ok(cat)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{parse_ddl, ParseOptions};

    fn catalog_with(sql: &str, name: &str) -> PhysicalCatalog {
        let mut cat = PhysicalCatalog::new();
        let parsed = parse_ddl(sql.as_bytes(), name, &ParseOptions::new(format!("{name}.sql"))).unwrap();
        cat.add_source(parsed, None).unwrap();
        cat
    }

    fn many_tables(n: usize) -> PhysicalCatalog {
        let sql: String = (0..n).map(|i| format!("CREATE TABLE t{i} (a INT);\n")).collect();
        catalog_with(&sql, "big")
    }

    #[test]
    fn empty_catalog_lists_empty_page() {
        let page = PhysicalCatalog::new().list_catalog(&CatalogQuery::default()).unwrap();
        assert!(page.items.is_empty());
        assert_eq!(page.next_cursor, None);
    }

    #[test]
    fn filter_by_name() {
        let cat = catalog_with(
            "CREATE TABLE users (id INT PRIMARY KEY, email VARCHAR(255)); CREATE TABLE user_roles (id INT);",
            "shop",
        );
        let page = cat
            .list_catalog(&CatalogQuery {
                pattern: Some("users".into()),
                ..Default::default()
            })
            .unwrap();
        assert_eq!(page.items.len(), 1);
        assert_eq!(page.items[0].name, "users");
        assert_eq!(page.items[0].column_count, 2);
    }

    #[test]
    fn pagination_is_disjoint_and_complete() {
        let cat = many_tables(25);
        let mut seen = Vec::new();
        let mut cursor = None;
        let mut pages = 0;
        loop {
            let page = cat
                .list_catalog(&CatalogQuery {
                    pattern: None,
                    page_size: Some(10),
                    cursor: cursor.clone(),
                })
                .unwrap();
            pages += 1;
            seen.extend(page.items.iter().map(|t| t.table_id.clone()));
            match page.next_cursor {
                Some(c) => cursor = Some(c),
                None => break,
            }
        }
        assert_eq!(pages, 3);
        let mut dedup = seen.clone();
        dedup.sort();
        dedup.dedup();
        assert_eq!(dedup.len(), 25);
        assert_eq!(seen, dedup, "pages come back ordered by id");
    }

    #[test]
    fn zero_page_size_rejected() {
        let q = CatalogQuery {
            page_size: Some(0),
            ..Default::default()
        };
        assert!(matches!(
            many_tables(1).list_catalog(&q),
            Err(IngestError::InvalidQuery(_))
        ));
    }

    #[test]
    fn source_name_conflicts_and_replacement() {
        let mut cat = catalog_with("CREATE TABLE a (x INT);", "shop");
        let again = parse_ddl(b"CREATE TABLE b (y INT);", "shop", &ParseOptions::new("shop.sql")).unwrap();
        let summary = cat.add_source(again, None).unwrap();
        assert!(summary.replaced);
        assert_eq!(cat.counts(), (1, 1, 1));
        assert_eq!(cat.tables().next().unwrap().name, "b");

        let other = parse_ddl(b"CREATE TABLE c (z INT);", "shop", &ParseOptions::new("elsewhere/shop.sql")).unwrap();
        assert!(matches!(cat.add_source(other, None), Err(IngestError::SourceConflict { .. })));
    }

    #[test]
    fn value_data_for_unknown_column() {
        let mut cat = many_tables(1);
        let rows: Vec<Option<&str>> = vec![Some("1")];
        assert!(matches!(
            cat.ingest_value_data("col_nope", rows),
            Err(IngestError::UnknownColumn(_))
        ));
    }

    #[test]
    fn save_load_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let mut cat = catalog_with("CREATE TABLE users (id INT, email TEXT); GARBAGE;", "shop");
        let email = cat.resolve_column_path("shop.users.email").unwrap().column_id.clone();
        cat.ingest_value_data(&email, vec![Some("a@x"), None]).unwrap();
        cat.save(dir.path()).unwrap();
        assert_eq!(PhysicalCatalog::load(dir.path()).unwrap(), cat);
    }
}
