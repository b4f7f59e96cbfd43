//! Name/type/value heuristics for joinable columns and unionable tables.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::ingest::{ColumnRecord, PhysicalCatalog, TableRecord, ValueSketch};
use crate::tokens::{jaccard, token_set};

pub const NAME_JACCARD_MIN: f64 = 0.5;
pub const UNION_COVERAGE_MIN: f64 = 0.6;

/// Names that say nothing on their own; a column named only with these is
/// qualified by its table's tokens for the join test (`users.id` ~ `user id`).
const GENERIC_TOKENS: &[&str] = &["id", "key", "pk", "uuid", "code", "no", "num", "number"];

#[derive(Debug, Clone, Copy)]
pub struct ColumnView<'a> {
    pub column: &'a ColumnRecord,
    pub table_name: &'a str,
    pub sketch: Option<&'a ValueSketch>,
}

impl<'a> ColumnView<'a> {
    pub fn from_catalog(catalog: &'a PhysicalCatalog, column_id: &str) -> Option<Self> {
        let column = catalog.column(column_id)?;
        let table = catalog.table(&column.table_id)?;
        Some(Self {
            column,
            table_name: &table.name,
            sketch: catalog.sketch(column_id),
        })
    }
}

#[derive(Debug, Clone)]
pub struct TableView<'a> {
    pub table: &'a TableRecord,
    pub columns: Vec<ColumnView<'a>>,
}

impl<'a> TableView<'a> {
    pub fn from_catalog(catalog: &'a PhysicalCatalog, table_id: &str) -> Option<Self> {
        let table = catalog.table(table_id)?;
        let columns = catalog
            .table_columns(table_id)
            .into_iter()
            .map(|c| ColumnView {
                column: c,
                table_name: &table.name,
                sketch: catalog.sketch(&c.column_id),
            })
            .collect();
        Some(Self { table, columns })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JoinEvidence {
    /// Tests that passed, from `type`, `name`, `values`.
    pub tests_passed: Vec<String>,
    pub name_jaccard: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sample_overlap: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnionEvidence {
    /// `(column of the smaller table, matched column of the other)`.
    pub mapping: Vec<(String, String)>,
    pub coverage: f64,
}

/// Token set used by the join test.
pub fn join_tokens(view: &ColumnView<'_>) -> BTreeSet<String> {
    let mut tokens = token_set(&view.column.name);
    if tokens.iter().all(|t| GENERIC_TOKENS.contains(&t.as_str())) {
        tokens.extend(token_set(view.table_name));
    }
    tokens
}

pub fn detect_joinable(a: &ColumnView<'_>, b: &ColumnView<'_>) -> Option<JoinEvidence> {
    if a.column.table_id == b.column.table_id {
        return None;
    }
    if !a.column.declared_type.join_compatible(b.column.declared_type) {
        return None;
    }
    let name_jaccard = jaccard(&join_tokens(a), &join_tokens(b));
    if name_jaccard < NAME_JACCARD_MIN {
        return None;
    }
    let mut tests_passed = vec!["type".to_string(), "name".to_string()];
    let sa = a.sketch.filter(|s| !s.sample_values.is_empty());
    let sb = b.sketch.filter(|s| !s.sample_values.is_empty());
    let sample_overlap = match (sa, sb) {
        (Some(sa), Some(sb)) => {
            let left: BTreeSet<&str> = sa.sample_values.iter().map(String::as_str).collect();
            let overlap = sb.sample_values.iter().filter(|v| left.contains(v.as_str())).count();
            if overlap == 0 {
                return None;
            }
            tests_passed.push("values".into());
            Some(overlap)
        }
        _ => None,
    };
    Some(JoinEvidence {
        tests_passed,
        name_jaccard,
        sample_overlap,
    })
}

/// Greedy best-match of the smaller table's columns onto the other's.
/// Argument order does not matter: ties in size are broken by table id.
pub fn detect_unionable(t1: &TableView<'_>, t2: &TableView<'_>) -> Option<UnionEvidence> {
    if t1.table.table_id == t2.table.table_id {
        return None;
    }
    let swap = (t2.columns.len(), &t2.table.table_id) < (t1.columns.len(), &t1.table.table_id);
    let (small, large) = if swap { (t2, t1) } else { (t1, t2) };
    if small.columns.is_empty() {
        return None;
    }
    let small_tokens: Vec<_> = small.columns.iter().map(|c| token_set(&c.column.name)).collect();
    let large_tokens: Vec<_> = large.columns.iter().map(|c| token_set(&c.column.name)).collect();

    let mut pairs: Vec<(f64, usize, usize)> = Vec::new();
    for (i, sc) in small.columns.iter().enumerate() {
        for (j, lc) in large.columns.iter().enumerate() {
            if !sc.column.declared_type.join_compatible(lc.column.declared_type) {
                continue;
            }
            let score = jaccard(&small_tokens[i], &large_tokens[j]);
            if score >= NAME_JACCARD_MIN {
                pairs.push((score, i, j));
            }
        }
    }
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));

    let mut small_used = vec![false; small.columns.len()];
    let mut large_used = vec![false; large.columns.len()];
    let mut matched: Vec<(usize, usize)> = Vec::new();
    for (_, i, j) in pairs {
        if !small_used[i] && !large_used[j] {
            small_used[i] = true;
            large_used[j] = true;
            matched.push((i, j));
        }
    }
    let coverage = matched.len() as f64 / small.columns.len() as f64;
    if coverage < UNION_COVERAGE_MIN {
        return None;
    }
    matched.sort_unstable();
    Some(UnionEvidence {
        mapping: matched
            .into_iter()
            .map(|(i, j)| (small.columns[i].column.name.clone(), large.columns[j].column.name.clone()))
            .collect(),
        coverage,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{parse_ddl, ParseOptions};

    fn catalog(ddl: &str) -> PhysicalCatalog {
        let mut cat = PhysicalCatalog::new();
        cat.add_source(parse_ddl(ddl.as_bytes(), "shop", &ParseOptions::new("shop.sql")).unwrap(), None)
            .unwrap();
        cat
    }

    fn col<'a>(cat: &'a PhysicalCatalog, path: &str) -> ColumnView<'a> {
        let id = cat.resolve_column_path(path).unwrap().column_id.clone();
        ColumnView::from_catalog(cat, &id).unwrap()
    }

    fn table<'a>(cat: &'a PhysicalCatalog, name: &str) -> TableView<'a> {
        TableView::from_catalog(cat, &crate::ids::table_id("shop", name)).unwrap()
    }

    #[test]
    fn user_id_joins_users_id() {
        // users.id -> {id} is generic, qualified to {user, id};
        // orders.user_id -> {user, id}; Jaccard = 2/2 = 1.0 >= 0.5.
        let cat = catalog("CREATE TABLE users (id INT PRIMARY KEY, email TEXT); CREATE TABLE orders (id INT, user_id INTEGER, created_at TIMESTAMP);");
        let ev = detect_joinable(&col(&cat, "shop.users.id"), &col(&cat, "shop.orders.user_id")).unwrap();
        assert_eq!(ev.name_jaccard, 1.0);
        assert_eq!(ev.tests_passed, ["type", "name"]);
        assert!(detect_joinable(&col(&cat, "shop.orders.user_id"), &col(&cat, "shop.users.id")).is_some());
        // {user, id} vs {order, id}: 1/3
        assert!(detect_joinable(&col(&cat, "shop.users.id"), &col(&cat, "shop.orders.id")).is_none());
        assert!(detect_joinable(&col(&cat, "shop.users.email"), &col(&cat, "shop.orders.created_at")).is_none());
    }

    #[test]
    fn identical_columns_pass_all_three_tests() {
        let mut cat = catalog("CREATE TABLE a (email TEXT); CREATE TABLE a_copy (email TEXT);");
        for path in ["shop.a.email", "shop.a_copy.email"] {
            let id = cat.resolve_column_path(path).unwrap().column_id.clone();
            cat.ingest_value_data(&id, [Some("x@y"), Some("z@y")]).unwrap();
        }
        let ev = detect_joinable(&col(&cat, "shop.a.email"), &col(&cat, "shop.a_copy.email")).unwrap();
        assert_eq!(ev.tests_passed, ["type", "name", "values"]);
        assert_eq!(ev.sample_overlap, Some(2));
    }

    #[test]
    fn disjoint_samples_block_join() {
        let mut cat = catalog("CREATE TABLE a (email TEXT); CREATE TABLE b (email TEXT);");
        let ida = cat.resolve_column_path("shop.a.email").unwrap().column_id.clone();
        let idb = cat.resolve_column_path("shop.b.email").unwrap().column_id.clone();
        cat.ingest_value_data(&ida, [Some("1")]).unwrap();
        cat.ingest_value_data(&idb, [Some("2")]).unwrap();
        assert!(detect_joinable(&col(&cat, "shop.a.email"), &col(&cat, "shop.b.email")).is_none());
    }

    #[test]
    fn same_table_never_joins() {
        let cat = catalog("CREATE TABLE a (user_id INT, id INT);");
        assert!(detect_joinable(&col(&cat, "shop.a.user_id"), &col(&cat, "shop.a.id")).is_none());
    }

    #[test]
    fn identical_schemas_union_with_identity_mapping() {
        let cat = catalog("CREATE TABLE s2019 (id INT, amount DECIMAL(10,2), note TEXT); CREATE TABLE s2020 (id INT, amount DECIMAL(10,2), note TEXT);");
        let ev = detect_unionable(&table(&cat, "s2019"), &table(&cat, "s2020")).unwrap();
        let ids: Vec<(String, String)> = ["id", "amount", "note"].iter().map(|n| (n.to_string(), n.to_string())).collect();
        assert_eq!(ev.mapping, ids);
        assert_eq!(ev.coverage, 1.0);
    }

    #[test]
    fn one_shared_column_of_five_is_not_unionable() {
        let cat = catalog("CREATE TABLE a (id INT, b1 TEXT, c1 TEXT, d1 TEXT, e1 TEXT); CREATE TABLE b (id INT, x TEXT, y TEXT, z TEXT, w TEXT);");
        assert!(detect_unionable(&table(&cat, "a"), &table(&cat, "b")).is_none());
    }

    #[test]
    fn subset_table_unions_into_superset() {
        // Hand enumeration: each of the four columns has exactly one
        // Jaccard-1.0 partner; no other pair reaches 0.5.
        let cat = catalog(
            "CREATE TABLE small (order_id INT, customer_name TEXT, total DECIMAL(8,2), placed_at TIMESTAMP);
             CREATE TABLE big (placed_at DATETIME, order_id BIGINT, region TEXT, customer_name VARCHAR(80), total NUMERIC, channel TEXT);",
        );
        let expected = vec![
            ("order_id".to_string(), "order_id".to_string()),
            ("customer_name".into(), "customer_name".into()),
            ("total".into(), "total".into()),
            ("placed_at".into(), "placed_at".into()),
        ];
        for (x, y) in [("small", "big"), ("big", "small")] {
            let ev = detect_unionable(&table(&cat, x), &table(&cat, y)).unwrap();
            assert_eq!(ev.mapping, expected);
            assert_eq!(ev.coverage, 1.0);
        }
    }
}
