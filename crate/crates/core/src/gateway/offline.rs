//! Deterministic, network-free responses for every template.
//!
//! Each response is a pure function of the template id and its bindings; no
//! clock, randomness or process state is consulted.

use std::collections::{BTreeMap, BTreeSet};

use super::template::{Bindings, TemplateId};
use crate::tokens::{is_stopword, name_tokens, singular, token_set};

pub const FALLBACK_CATEGORY: &str = "misc";

pub fn respond(template_id: TemplateId, bindings: &Bindings) -> String {
    match template_id {
        TemplateId::SummarizeColumn => summarize_column(bindings),
        TemplateId::SummarizeTable => summarize_table(bindings),
        TemplateId::NameCategory => name_category(
            bindings
                .get("labels")
                .map(String::as_str)
                .unwrap_or_default()
                .lines(),
        ),
        TemplateId::RephraseQuery => get(bindings, "query").trim().to_string(),
        TemplateId::DescribeRelation => describe_relation(bindings),
    }
}

fn get<'a>(bindings: &'a Bindings, key: &str) -> &'a str {
    bindings.get(key).map(|s| s.trim()).unwrap_or_default()
}

fn sentence(out: &mut String, prefix: &str, value: &str) {
    let value = value.trim().trim_end_matches('.').trim();
    if value.is_empty() {
        return;
    }
    if !out.is_empty() {
        out.push(' ');
    }
    out.push_str(prefix);
    out.push_str(value);
    out.push('.');
}

fn summarize_column(b: &Bindings) -> String {
    let mut out = String::new();
    let path = get(b, "path");
    let source = get(b, "source_info");
    // Leading with the bare name keeps sibling summaries apart under a
    // bag-of-tokens embedder; the path alone repeats every sibling's tokens.
    let name = path.rsplit('.').next().unwrap_or(path);
    let located = if source.is_empty() {
        path.to_string()
    } else {
        format!("{path} in {source}")
    };
    if name.is_empty() || name == path {
        sentence(&mut out, "", &located);
    } else {
        sentence(&mut out, "", &format!("Column {name}: {located}"));
    }
    sentence(&mut out, "Siblings: ", get(b, "siblings"));
    sentence(&mut out, "Values: ", get(b, "value_characteristics"));
    sentence(&mut out, "Tasks: ", get(b, "related_tasks"));
    sentence(&mut out, "Description: ", get(b, "description"));
    out
}

fn summarize_table(b: &Bindings) -> String {
    let mut out = String::new();
    sentence(
        &mut out,
        "",
        &format!("Table {} with columns: {}", get(b, "table"), get(b, "columns")),
    );
    for line in get(b, "column_summaries").lines() {
        let line = line.trim();
        if !line.is_empty() {
            if !out.is_empty() {
                out.push(' ');
            }
            out.push_str(line);
        }
    }
    out
}

/// The two most frequent name tokens across member labels.
///
/// Tokens are grouped by their singular form and displayed in the first
/// spelling seen; ties are broken by the singular form, lexicographically.
pub fn name_category<'a>(labels: impl IntoIterator<Item = &'a str>) -> String {
    let mut counts: BTreeMap<String, (usize, String)> = BTreeMap::new();
    for label in labels {
        for token in name_tokens(label) {
            if is_stopword(&token) || token.chars().all(|c| c.is_ascii_digit()) {
                continue;
            }
            let entry = counts.entry(singular(&token)).or_insert((0, token));
            entry.0 += 1;
        }
    }
    let mut ranked: Vec<(&String, &(usize, String))> = counts.iter().collect();
    ranked.sort_by(|a, b| b.1 .0.cmp(&a.1 .0).then_with(|| a.0.cmp(b.0)));
    let words: Vec<&str> = ranked.iter().take(2).map(|(_, (_, surface))| surface.as_str()).collect();
    if words.is_empty() {
        FALLBACK_CATEGORY.to_string()
    } else {
        words.join(" ")
    }
}

fn describe_relation(b: &Bindings) -> String {
    let from: BTreeSet<String> = token_set(get(b, "from_label"));
    let to: BTreeSet<String> = token_set(get(b, "to_label"));
    let shared: Vec<&str> = from.intersection(&to).map(String::as_str).collect();
    if shared.is_empty() {
        let cosine: f64 = get(b, "cosine").parse().unwrap_or(0.0);
        format!("semantically similar (cosine={cosine:.2})")
    } else {
        format!("related via shared tokens: {}", shared.join(", "))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bind(pairs: &[(&str, &str)]) -> Bindings {
        pairs.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect()
    }

    #[test]
    fn category_naming_rule_by_hand() {
        // tokens: users|user -> "user" x2, roles x1, accounts x1;
        // tie between account/role broken lexicographically.
        assert_eq!(name_category(["users", "user_roles", "accounts"]), "users accounts");
        assert_eq!(name_category(["the", "of"]), FALLBACK_CATEGORY);
        assert_eq!(name_category(["orders"]), "orders");
        // order x2 (first seen as "order"), item x2 (first seen as "items")
        assert_eq!(name_category(["order_items", "orders", "items_2019"]), "items order");
    }

    #[test]
    fn column_summary_template() {
        let text = respond(
            TemplateId::SummarizeColumn,
            &bind(&[("path", "shop.users.email"), ("siblings", "id"), ("source_info", "shop (file)")]),
        );
        assert_eq!(text, "Column email: shop.users.email in shop (file). Siblings: id.");
        let minimal = respond(TemplateId::SummarizeColumn, &bind(&[("path", "a.b.c")]));
        assert_eq!(minimal, "Column c: a.b.c.");
    }

    #[test]
    fn relation_descriptions() {
        let shared = respond(
            TemplateId::DescribeRelation,
            &bind(&[("from_label", "user_id"), ("to_label", "users id"), ("cosine", "0.9")]),
        );
        assert_eq!(shared, "related via shared tokens: id, user");
        let similar = respond(
            TemplateId::DescribeRelation,
            &bind(&[("from_label", "email"), ("to_label", "created_at"), ("cosine", "0.6149")]),
        );
        assert_eq!(similar, "semantically similar (cosine=0.61)");
    }

    #[test]
    fn rephrase_is_identity() {
        let out = respond(TemplateId::RephraseQuery, &bind(&[("query", " info about users "), ("example", "x")]));
        assert_eq!(out, "info about users");
    }
}
