use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::sync::OnceLock;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

/// Closed type alphabet every declared column type is folded into.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormalizedType {
    Integer,
    Decimal,
    Float,
    Text,
    Boolean,
    Datetime,
    Binary,
    Other,
}

impl NormalizedType {
    pub const ALL: [NormalizedType; 8] = [
        NormalizedType::Integer,
        NormalizedType::Decimal,
        NormalizedType::Float,
        NormalizedType::Text,
        NormalizedType::Boolean,
        NormalizedType::Datetime,
        NormalizedType::Binary,
        NormalizedType::Other,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            NormalizedType::Integer => "integer",
            NormalizedType::Decimal => "decimal",
            NormalizedType::Float => "float",
            NormalizedType::Text => "text",
            NormalizedType::Boolean => "boolean",
            NormalizedType::Datetime => "datetime",
            NormalizedType::Binary => "binary",
            NormalizedType::Other => "other",
        }
    }

    fn parse_token(token: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|t| t.as_str() == token)
    }

    /// Join-compatibility: identical tokens, or the integer/decimal pair.
    pub fn join_compatible(self, other: NormalizedType) -> bool {
        self == other
            || matches!(
                (self, other),
                (NormalizedType::Integer, NormalizedType::Decimal)
                    | (NormalizedType::Decimal, NormalizedType::Integer)
            )
    }

    pub fn is_text(self) -> bool {
        self == NormalizedType::Text
    }
}

impl fmt::Display for NormalizedType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

const TYPE_MAP_SOURCE: &str = include_str!("../../../../config/type_map.txt");

fn type_map() -> &'static HashMap<String, NormalizedType> {
    static MAP: OnceLock<HashMap<String, NormalizedType>> = OnceLock::new();
    MAP.get_or_init(|| {
        let mut map = HashMap::new();
        for line in TYPE_MAP_SOURCE.lines() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                panic!("malformed type map line: {line}");
            };
            let token = NormalizedType::parse_token(value.trim())
                .unwrap_or_else(|| panic!("unknown type token in type map: {line}"));
            map.insert(key.trim().to_ascii_lowercase(), token);
        }
        map
    })
}

/// Normalizes a declared base type given as its words (argument lists removed).
pub fn normalize_type(words: &[&str]) -> NormalizedType {
    let map = type_map();
    let lower: Vec<String> = words.iter().map(|w| w.to_ascii_lowercase()).collect();
    if lower.len() >= 2 {
        if let Some(t) = map.get(&format!("{} {}", lower[0], lower[1])) {
            return *t;
        }
    }
    lower
        .first()
        .and_then(|w| map.get(w.as_str()))
        .copied()
        .unwrap_or(NormalizedType::Other)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Constraint {
    PrimaryKey,
    ForeignKey,
    NotNull,
    Unique,
    DefaultPresent,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ByteSpan {
    pub start: usize,
    pub end: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceRecord {
    pub source_id: String,
    pub name: String,
    pub origin_uri: String,
    pub ingested_at: DateTime<Utc>,
    pub table_count: usize,
}

impl SourceRecord {
    /// `file` for local paths, `url` for anything with a scheme.
    pub fn origin_kind(&self) -> &'static str {
        if self.origin_uri.contains("://") {
            "url"
        } else {
            "file"
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableRecord {
    pub table_id: String,
    pub source_id: String,
    pub name: String,
    pub columns: Vec<String>,
    pub raw_ddl_span: ByteSpan,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub comment: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnRecord {
    pub column_id: String,
    pub table_id: String,
    pub name: String,
    pub declared_type: NormalizedType,
    pub raw_type: String,
    pub constraints: BTreeSet<Constraint>,
    pub ordinal: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub comment: Option<String>,
}

impl ColumnRecord {
    pub fn has(&self, constraint: Constraint) -> bool {
        self.constraints.contains(&constraint)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Severity {
    Error,
    Warning,
    Info,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiagnosticCode {
    /// Statement could not be understood at all.
    Unrecoverable,
    /// A recognized statement kind that carries no table definition.
    SkippedStatement,
    /// CREATE TABLE without any parseable column.
    NoColumns,
    /// Later definition of an already defined table in the same source.
    DuplicateTable,
    DuplicateColumn,
    /// Part of a table body that was ignored while the table itself was kept.
    IgnoredElement,
    UnterminatedBody,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParseDiagnostic {
    pub statement_index: usize,
    pub span: ByteSpan,
    pub severity: Severity,
    pub code: DiagnosticCode,
    pub message: String,
}
