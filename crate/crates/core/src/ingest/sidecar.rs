//! Per-source sidecar metadata.
//!
//! A sidecar is a UTF-8 text file next to the DDL (`shop.sql` -> `shop.meta`)
//! holding one `key = value` pair per line:
//!
//! ```text
//! # comments start with '#'
//! users.email.description = Primary contact address of the customer
//! users.email.tasks = churn prediction; newsletter targeting
//! ```
//!
//! Keys are `<table>.<column>.<field>` where field is `description` or
//! `tasks`. Table and column names match case-insensitively.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::IngestError;

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnMetadata {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tasks: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SidecarMetadata {
    /// Keyed by lowercase `table.column`.
    pub columns: BTreeMap<String, ColumnMetadata>,
}

impl SidecarMetadata {
    pub fn parse(text: &str) -> Result<Self, IngestError> {
        let mut out = SidecarMetadata::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let bad = |why: &str| IngestError::Sidecar {
                line: lineno + 1,
                message: why.to_string(),
            };
            let (key, value) = line.split_once('=').ok_or_else(|| bad("expected `key = value`"))?;
            let key = key.trim();
            let value = value.trim();
            let (path, field) = key.rsplit_once('.').ok_or_else(|| bad("key must be table.column.field"))?;
            if !path.contains('.') {
                return Err(bad("key must be table.column.field"));
            }
            let entry = out.columns.entry(path.to_lowercase()).or_default();
            let slot = match field {
                "description" => &mut entry.description,
                "tasks" => &mut entry.tasks,
                other => return Err(bad(&format!("unknown field `{other}`"))),
            };
            if !value.is_empty() {
                *slot = Some(value.to_string());
            }
        }
        Ok(out)
    }

    pub fn column(&self, table: &str, column: &str) -> Option<&ColumnMetadata> {
        self.columns
            .get(&format!("{}.{}", table.to_lowercase(), column.to_lowercase()))
    }
}
