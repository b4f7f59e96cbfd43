//! Stable content-derived identifiers.
//!
//! Every identifier is the first 128 bits of a SHA-256 digest over a canonical
//! path string, rendered as lowercase unpadded base32 and prefixed with a short
//! kind tag so ids stay readable in logs and payloads.

use data_encoding::BASE32_NOPAD;
use sha2::{Digest, Sha256};

fn digest128(canonical: &str) -> String {
    let digest = Sha256::digest(canonical.as_bytes());
    BASE32_NOPAD.encode(&digest[..16]).to_ascii_lowercase()
}

/// Length-prefixed 128-bit content hash used for cache keys.
pub fn content_hash(parts: &[&str]) -> String {
    let mut hasher = Sha256::new();
    for part in parts {
        hasher.update((part.len() as u64).to_le_bytes());
        hasher.update(part.as_bytes());
    }
    BASE32_NOPAD.encode(&hasher.finalize()[..16]).to_ascii_lowercase()
}

pub fn source_id(name: &str, origin_uri: &str) -> String {
    format!("src_{}", digest128(&format!("source\u{1f}{name}\u{1f}{origin_uri}")))
}

pub fn table_id(source_name: &str, table_name: &str) -> String {
    format!("tbl_{}", digest128(&format!("table\u{1f}{source_name}\u{1f}{table_name}")))
}

pub fn column_id(source_name: &str, table_name: &str, column_name: &str, ordinal: usize) -> String {
    format!(
        "col_{}",
        digest128(&format!(
            "column\u{1f}{source_name}\u{1f}{table_name}\u{1f}{column_name}\u{1f}{ordinal}"
        ))
    )
}

/// Category ids depend only on their level and (sorted) children.
pub fn category_id(level: u32, children: &[String]) -> String {
    let mut canonical = format!("category\u{1f}{level}");
    for child in children {
        canonical.push('\u{1f}');
        canonical.push_str(child);
    }
    format!("cat_{}", digest128(&canonical))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ids_are_deterministic_and_distinct() {
        assert_eq!(column_id("shop", "users", "id", 0), column_id("shop", "users", "id", 0));
        assert_ne!(column_id("shop", "users", "id", 0), column_id("shop", "users", "id", 1));
        assert_ne!(table_id("shop", "users"), table_id("shop2", "users"));
        assert_eq!(source_id("shop", "a.sql"), source_id("shop", "a.sql"));
        assert_ne!(source_id("shop", "a.sql"), source_id("shop", "b.sql"));
    }

    #[test]
    fn rendering_is_base32_of_128_bits() {
        let id = table_id("s", "t");
        let body = id.strip_prefix("tbl_").unwrap();
        // 128 bits -> 26 base32 chars without padding
        assert_eq!(body.len(), 26);
        assert!(body.chars().all(|c| c.is_ascii_lowercase() || ('2'..='7').contains(&c)));
    }

    #[test]
    fn content_hash_separates_parts() {
        assert_ne!(content_hash(&["ab", "c"]), content_hash(&["a", "bc"]));
    }
}
