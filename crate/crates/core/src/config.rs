//! `lakescope.toml`: search, hierarchy, relation and embedder settings.
//!
//! Every section is optional; missing keys take the values of the committed
//! `config/lakescope.toml`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::hierarchy::HierarchyConfig;
use crate::relation::{DEFAULT_M, DEFAULT_THRESHOLD};

pub const DEFAULT_CONFIG: &str = include_str!("../../../config/lakescope.toml");
pub const DEFAULT_EXAMPLE_QUERY: &str = "list all tables and columns about <topic>";

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config: {0}")]
    Io(#[from] std::io::Error),
    #[error("invalid config: {0}")]
    Parse(String),
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SearchConfig {
    pub example_query: String,
    pub default_n: usize,
    pub include_categories: bool,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            example_query: DEFAULT_EXAMPLE_QUERY.into(),
            default_n: 20,
            include_categories: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RelationConfig {
    pub m: usize,
    pub threshold: f64,
}

impl Default for RelationConfig {
    fn default() -> Self {
        Self {
            m: DEFAULT_M,
            threshold: DEFAULT_THRESHOLD,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EmbedderConfig {
    pub dim: usize,
}

impl Default for EmbedderConfig {
    fn default() -> Self {
        Self {
            dim: crate::embed::DEFAULT_DIM,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LakescopeConfig {
    pub search: SearchConfig,
    pub hierarchy: HierarchyConfig,
    pub relations: RelationConfig,
    pub embedder: EmbedderConfig,
}

impl LakescopeConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let config: Self = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    /// Reads `path` if it exists, otherwise returns the defaults.
    pub fn load_or_default(path: &Path) -> Result<Self, ConfigError> {
        match std::fs::read_to_string(path) {
            Ok(text) => Self::parse(&text),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(Self::default()),
            Err(e) => Err(e.into()),
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |m: &str| Err(ConfigError::Invalid(m.to_string()));
        if self.search.example_query.trim().is_empty() {
            return invalid("search.example_query must not be empty");
        }
        if self.search.default_n == 0 {
            return invalid("search.default_n must be at least 1");
        }
        if self.relations.m == 0 {
            return invalid("relations.m must be at least 1");
        }
        if !(-1.0..=1.0).contains(&self.relations.threshold) {
            return invalid("relations.threshold must lie in [-1, 1]");
        }
        if self.embedder.dim == 0 {
            return invalid("embedder.dim must be at least 1");
        }
        self.hierarchy
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn committed_file_equals_defaults() {
        assert_eq!(LakescopeConfig::parse(DEFAULT_CONFIG).unwrap(), LakescopeConfig::default());
        assert_eq!(LakescopeConfig::default().search.example_query, DEFAULT_EXAMPLE_QUERY);
    }

    #[test]
    fn partial_override() {
        let c = LakescopeConfig::parse("[search]\nexample_query = \"show tables about <topic>\"\n[hierarchy]\nK = 4").unwrap();
        assert_eq!(c.search.example_query, "show tables about <topic>");
        assert_eq!(c.search.default_n, 20);
        assert_eq!(c.hierarchy.k, 4);
        assert_eq!(c.hierarchy.branching, 8);
    }

    #[test]
    fn rejects_bad_values() {
        for bad in [
            "[search]\nexample_query = \"  \"",
            "[hierarchy]\nB = 1",
            "[relations]\nm = 0",
            "[relations]\nthreshold = 1.5",
            "[search]\nbogus = 1",
        ] {
            assert!(LakescopeConfig::parse(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn missing_file_gives_defaults() {
        let dir = tempfile::tempdir().unwrap();
        assert_eq!(
            LakescopeConfig::load_or_default(&dir.path().join("none.toml")).unwrap(),
            LakescopeConfig::default()
        );
    }
}
