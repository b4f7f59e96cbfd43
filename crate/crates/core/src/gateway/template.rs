use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::GatewayError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum TemplateId {
    SummarizeColumn,
    SummarizeTable,
    NameCategory,
    RephraseQuery,
    DescribeRelation,
}

impl TemplateId {
    pub const ALL: [TemplateId; 5] = [
        TemplateId::SummarizeColumn,
        TemplateId::SummarizeTable,
        TemplateId::NameCategory,
        TemplateId::RephraseQuery,
        TemplateId::DescribeRelation,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            TemplateId::SummarizeColumn => "SUMMARIZE_COLUMN",
            TemplateId::SummarizeTable => "SUMMARIZE_TABLE",
            TemplateId::NameCategory => "NAME_CATEGORY",
            TemplateId::RephraseQuery => "REPHRASE_QUERY",
            TemplateId::DescribeRelation => "DESCRIBE_RELATION",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|t| t.as_str() == s)
    }
}

impl fmt::Display for TemplateId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

pub type Bindings = BTreeMap<String, String>;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptTemplate {
    pub template_id: TemplateId,
    pub version: u32,
    pub body: String,
}

enum Piece<'a> {
    Text(&'a str),
    Placeholder(&'a str),
}

/// Splits a body into literal text and `{name}` placeholders; `{{` and `}}`
/// are literal braces.
fn pieces(body: &str) -> Vec<Piece<'_>> {
    let mut out = Vec::new();
    let bytes = body.as_bytes();
    let mut lit_start = 0;
    let mut i = 0;
    while i < bytes.len() {
        match bytes[i] {
            b'{' if bytes.get(i + 1) == Some(&b'{') => {
                out.push(Piece::Text(&body[lit_start..=i]));
                i += 2;
                lit_start = i;
            }
            b'}' if bytes.get(i + 1) == Some(&b'}') => {
                out.push(Piece::Text(&body[lit_start..=i]));
                i += 2;
                lit_start = i;
            }
            b'{' => {
                let name_len = bytes[i + 1..]
                    .iter()
                    .take_while(|b| b.is_ascii_alphanumeric() || **b == b'_')
                    .count();
                if name_len > 0 && bytes.get(i + 1 + name_len) == Some(&b'}') {
                    out.push(Piece::Text(&body[lit_start..i]));
                    out.push(Piece::Placeholder(&body[i + 1..i + 1 + name_len]));
                    i += name_len + 2;
                    lit_start = i;
                } else {
                    i += 1;
                }
            }
            _ => i += 1,
        }
    }
    out.push(Piece::Text(&body[lit_start..]));
    out
}

impl PromptTemplate {
    pub fn new(template_id: TemplateId, version: u32, body: impl Into<String>) -> Self {
        Self {
            template_id,
            version,
            body: body.into(),
        }
    }

    pub fn placeholders(&self) -> Vec<&str> {
        pieces(&self.body)
            .into_iter()
            .filter_map(|p| match p {
                Piece::Placeholder(name) => Some(name),
                Piece::Text(_) => None,
            })
            .collect()
    }

    /// Substitutes every placeholder. Unused bindings are ignored.
    pub fn render(&self, bindings: &Bindings) -> Result<String, GatewayError> {
        let mut out = String::with_capacity(self.body.len());
        for piece in pieces(&self.body) {
            match piece {
                Piece::Text(t) => out.push_str(t),
                Piece::Placeholder(name) => match bindings.get(name) {
                    Some(value) => out.push_str(value),
                    None => {
                        return Err(GatewayError::Template {
                            template_id: self.template_id,
                            placeholder: name.to_string(),
                        })
                    }
                },
            }
        }
        Ok(out)
    }
}

/// The active template per id (highest version wins).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TemplateSet {
    templates: BTreeMap<TemplateId, PromptTemplate>,
}

const BUILTIN: [(TemplateId, &str); 5] = [
    (TemplateId::SummarizeColumn, include_str!("../../../../config/prompts/SUMMARIZE_COLUMN.v1.txt")),
    (TemplateId::SummarizeTable, include_str!("../../../../config/prompts/SUMMARIZE_TABLE.v1.txt")),
    (TemplateId::NameCategory, include_str!("../../../../config/prompts/NAME_CATEGORY.v1.txt")),
    (TemplateId::RephraseQuery, include_str!("../../../../config/prompts/REPHRASE_QUERY.v1.txt")),
    (TemplateId::DescribeRelation, include_str!("../../../../config/prompts/DESCRIBE_RELATION.v1.txt")),
];

impl Default for TemplateSet {
    fn default() -> Self {
        Self::builtin()
    }
}

impl TemplateSet {
    pub fn builtin() -> Self {
        let templates = BUILTIN
            .iter()
            .map(|(id, body)| (*id, PromptTemplate::new(*id, 1, *body)))
            .collect();
        Self { templates }
    }

    /// Builtins overlaid with `<ID>.v<N>.txt` files found in `dir`; for each
    /// id the highest version present wins.
    pub fn load_dir(dir: &Path) -> Result<Self, GatewayError> {
        let mut set = Self::builtin();
        let entries = std::fs::read_dir(dir).map_err(|e| GatewayError::Io(format!("{}: {e}", dir.display())))?;
        for entry in entries {
            let entry = entry.map_err(|e| GatewayError::Io(e.to_string()))?;
            let file_name = entry.file_name().to_string_lossy().into_owned();
            let Some(stem) = file_name.strip_suffix(".txt") else { continue };
            let Some((id, version)) = stem.rsplit_once(".v") else { continue };
            let (Some(id), Ok(version)) = (TemplateId::parse(id), version.parse::<u32>()) else {
                continue;
            };
            let body = std::fs::read_to_string(entry.path()).map_err(|e| GatewayError::Io(e.to_string()))?;
            if set.templates.get(&id).is_none_or(|t| t.version <= version) {
                set.templates.insert(id, PromptTemplate::new(id, version, body));
            }
        }
        Ok(set)
    }

    pub fn insert(&mut self, template: PromptTemplate) {
        self.templates.insert(template.template_id, template);
    }

    pub fn get(&self, id: TemplateId) -> &PromptTemplate {
        self.templates.get(&id).expect("every template id has a builtin")
    }

    pub fn versions(&self) -> BTreeMap<TemplateId, u32> {
        self.templates.iter().map(|(id, t)| (*id, t.version)).collect()
    }
}
