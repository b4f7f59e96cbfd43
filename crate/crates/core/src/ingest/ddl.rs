//! A forgiving CREATE TABLE parser.
//!
//! The input is split into statements on `;` (and on a top-level `CREATE`
//! that follows an unterminated statement). Each statement is parsed on its
//! own, so a broken statement costs exactly that statement: it yields a
//! diagnostic and parsing resumes at the next one.

use std::collections::{BTreeSet, HashSet};

use chrono::{DateTime, Utc};

use super::model::{
    normalize_type, ByteSpan, ColumnRecord, Constraint, DiagnosticCode, ParseDiagnostic,
    Severity, SourceRecord, TableRecord,
};
use super::IngestError;
use crate::ids;

#[derive(Debug, Clone)]
pub struct ParseOptions {
    pub origin_uri: String,
    pub ingested_at: DateTime<Utc>,
    /// Replace invalid UTF-8 sequences instead of failing with `EncodingError`.
    pub lossy_utf8: bool,
}

impl ParseOptions {
    pub fn new(origin_uri: impl Into<String>) -> Self {
        Self {
            origin_uri: origin_uri.into(),
            ingested_at: DateTime::<Utc>::UNIX_EPOCH,
            lossy_utf8: true,
        }
    }

    pub fn ingested_at(mut self, at: DateTime<Utc>) -> Self {
        self.ingested_at = at;
        self
    }

    pub fn strict_utf8(mut self) -> Self {
        self.lossy_utf8 = false;
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParsedSource {
    pub source: SourceRecord,
    pub tables: Vec<TableRecord>,
    pub columns: Vec<ColumnRecord>,
    pub diagnostics: Vec<ParseDiagnostic>,
}

/// Parses a DDL byte stream into physical catalog records.
pub fn parse_ddl(
    input: &[u8],
    source_name: &str,
    options: &ParseOptions,
) -> Result<ParsedSource, IngestError> {
    if input.is_empty() {
        return Err(IngestError::EmptyInput);
    }
    let text = match std::str::from_utf8(input) {
        Ok(text) => std::borrow::Cow::Borrowed(text),
        Err(err) if !options.lossy_utf8 => {
            return Err(IngestError::Encoding {
                offset: err.valid_up_to(),
            })
        }
        Err(_) => String::from_utf8_lossy(input),
    };

    let source_id = ids::source_id(source_name, &options.origin_uri);
    let tokens = lex(&text);
    let statements = split_statements(&tokens);

    let mut tables: Vec<TableRecord> = Vec::new();
    let mut columns = Vec::new();
    let mut diagnostics = Vec::new();
    let mut seen_tables: HashSet<String> = HashSet::new();

    for (index, stmt) in statements.iter().enumerate() {
        let span = ByteSpan {
            start: stmt[0].start,
            end: stmt[stmt.len() - 1].end,
        };
        let mut diag = |severity, code, message: String| {
            diagnostics.push(ParseDiagnostic {
                statement_index: index,
                span,
                severity,
                code,
                message,
            })
        };
        match classify(stmt) {
            StatementKind::CreateTable { name_at } => {
                match parse_create_table(stmt, name_at) {
                    Ok(parsed) => {
                        for (severity, code, message) in parsed.warnings {
                            diag(severity, code, message);
                        }
                        if !seen_tables.insert(parsed.name.clone()) {
                            diag(
                                Severity::Warning,
                                DiagnosticCode::DuplicateTable,
                                format!("table `{}` already defined; later definition ignored", parsed.name),
                            );
                            continue;
                        }
                        let table_id = ids::table_id(source_name, &parsed.name);
                        let mut column_ids = Vec::with_capacity(parsed.columns.len());
                        for (ordinal, col) in parsed.columns.into_iter().enumerate() {
                            let column_id = ids::column_id(source_name, &parsed.name, &col.name, ordinal);
                            column_ids.push(column_id.clone());
                            columns.push(ColumnRecord {
                                column_id,
                                table_id: table_id.clone(),
                                name: col.name,
                                declared_type: normalize_type(
                                    &col.type_words.iter().map(String::as_str).collect::<Vec<_>>(),
                                ),
                                raw_type: col.raw_type,
                                constraints: col.constraints,
                                ordinal,
                                comment: col.comment,
                            });
                        }
                        tables.push(TableRecord {
                            table_id,
                            source_id: source_id.clone(),
                            name: parsed.name,
                            columns: column_ids,
                            raw_ddl_span: span,
                            comment: parsed.comment,
                        });
                    }
                    Err((code, message)) => diag(Severity::Error, code, message),
                }
            }
            StatementKind::Skipped(what) => diag(
                Severity::Info,
                DiagnosticCode::SkippedStatement,
                format!("{what} statement skipped"),
            ),
            StatementKind::Unknown => diag(
                Severity::Error,
                DiagnosticCode::Unrecoverable,
                format!("unrecognized statement starting with `{}`", stmt[0].text(&text)),
            ),
        }
    }

    let source = SourceRecord {
        source_id,
        name: source_name.to_string(),
        origin_uri: options.origin_uri.clone(),
        ingested_at: options.ingested_at,
        table_count: tables.len(),
    };
    Ok(ParsedSource {
        source,
        tables,
        columns,
        diagnostics,
    })
}

/// Counts `CREATE [modifiers] TABLE` heads the way the statement splitter sees them.
pub fn count_create_table_heads(input: &[u8]) -> usize {
    let text = String::from_utf8_lossy(input);
    let tokens = lex(&text);
    split_statements(&tokens)
        .iter()
        .filter(|stmt| matches!(classify(stmt), StatementKind::CreateTable { .. }) || is_create_table_head(stmt))
        .count()
}

fn is_create_table_head(stmt: &[Token]) -> bool {
    stmt.first().is_some_and(|t| t.is_kw("create"))
        && stmt.iter().take(8).any(|t| t.is_kw("table"))
}

// ---------------------------------------------------------------------------
// Lexer

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Word(String),
    Quoted(String),
    Str(String),
    Num(String),
    Punct(char),
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    start: usize,
    end: usize,
}

impl Token {
    fn is_kw(&self, kw: &str) -> bool {
        matches!(&self.tok, Tok::Word(w) if w.eq_ignore_ascii_case(kw))
    }

    fn is_punct(&self, c: char) -> bool {
        self.tok == Tok::Punct(c)
    }

    fn text<'a>(&self, src: &'a str) -> &'a str {
        &src[self.start..self.end]
    }

    /// Identifier value with case folding: unquoted folds to lowercase.
    fn ident(&self) -> Option<String> {
        match &self.tok {
            Tok::Word(w) => Some(w.to_lowercase()),
            Tok::Quoted(q) => Some(q.clone()),
            _ => None,
        }
    }
}

fn lex(src: &str) -> Vec<Token> {
    let bytes = src.as_bytes();
    let mut tokens = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        if c == b'-' && bytes.get(i + 1) == Some(&b'-') || c == b'#' {
            while i < bytes.len() && bytes[i] != b'\n' {
                i += 1;
            }
            continue;
        }
        if c == b'/' && bytes.get(i + 1) == Some(&b'*') {
            i = match src[i + 2..].find("*/") {
                Some(off) => i + 2 + off + 2,
                None => bytes.len(),
            };
            continue;
        }
        if c == b'\'' {
            if let Some((value, end)) = scan_quoted(src, i, b'\'', true) {
                tokens.push(Token { tok: Tok::Str(value), start: i, end });
                i = end;
            } else {
                tokens.push(Token { tok: Tok::Punct('\''), start: i, end: i + 1 });
                i += 1;
            }
            continue;
        }
        if c == b'"' || c == b'`' {
            if let Some((value, end)) = scan_quoted(src, i, c, false) {
                tokens.push(Token { tok: Tok::Quoted(value), start: i, end });
                i = end;
            } else {
                tokens.push(Token { tok: Tok::Punct(c as char), start: i, end: i + 1 });
                i += 1;
            }
            continue;
        }
        if c == b'[' {
            // [bracketed identifier] on one line; `[]` stays punctuation.
            if let Some(close) = src[i + 1..].find([']', '\n']) {
                let end = i + 1 + close;
                if bytes[end] == b']' && close > 0 {
                    tokens.push(Token {
                        tok: Tok::Quoted(src[i + 1..end].to_string()),
                        start: i,
                        end: end + 1,
                    });
                    i = end + 1;
                    continue;
                }
            }
            tokens.push(Token { tok: Tok::Punct('['), start: i, end: i + 1 });
            i += 1;
            continue;
        }
        if c.is_ascii_digit() {
            let start = i;
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'.') {
                i += 1;
            }
            tokens.push(Token { tok: Tok::Num(src[start..i].to_string()), start, end: i });
            continue;
        }
        let ch = src[i..].chars().next().expect("in bounds");
        if ch.is_alphanumeric() || ch == '_' || ch == '$' {
            let start = i;
            for (off, ch) in src[start..].char_indices() {
                if ch.is_alphanumeric() || ch == '_' || ch == '$' {
                    i = start + off + ch.len_utf8();
                } else {
                    break;
                }
            }
            tokens.push(Token { tok: Tok::Word(src[start..i].to_string()), start, end: i });
            continue;
        }
        tokens.push(Token { tok: Tok::Punct(ch), start: i, end: i + ch.len_utf8() });
        i += ch.len_utf8();
    }
    tokens
}

/// Scans a quoted run starting at `start`; doubled quotes escape themselves.
/// Returns `None` when the quote is never closed.
fn scan_quoted(src: &str, start: usize, quote: u8, backslash_escapes: bool) -> Option<(String, usize)> {
    let bytes = src.as_bytes();
    let mut value = Vec::new();
    let mut i = start + 1;
    while i < bytes.len() {
        let b = bytes[i];
        if backslash_escapes && b == b'\\' && i + 1 < bytes.len() {
            value.push(bytes[i + 1]);
            i += 2;
            continue;
        }
        if b == quote {
            if bytes.get(i + 1) == Some(&quote) {
                value.push(quote);
                i += 2;
                continue;
            }
            return Some((String::from_utf8_lossy(&value).into_owned(), i + 1));
        }
        value.push(b);
        i += 1;
    }
    None
}

fn split_statements(tokens: &[Token]) -> Vec<&[Token]> {
    let mut statements = Vec::new();
    let mut start = 0;
    let mut depth: i32 = 0;
    for (i, token) in tokens.iter().enumerate() {
        match &token.tok {
            Tok::Punct(';') => {
                if i > start {
                    statements.push(&tokens[start..i]);
                }
                start = i + 1;
                depth = 0;
            }
            Tok::Punct('(') => depth += 1,
            Tok::Punct(')') => depth -= 1,
            Tok::Word(_) if i > start && token.is_kw("create") => {
                // A CREATE at statement level (or after an unbalanced body) means
                // the previous statement lost its terminator.
                let at_top = depth <= 0;
                let unbalanced_table = depth > 0 && tokens.get(i + 1).is_some_and(|t| t.is_kw("table"));
                if at_top || unbalanced_table {
                    statements.push(&tokens[start..i]);
                    start = i;
                    depth = 0;
                }
            }
            _ => {}
        }
    }
    if start < tokens.len() {
        statements.push(&tokens[start..]);
    }
    statements
}

// ---------------------------------------------------------------------------
// Statement parsing

enum StatementKind {
    CreateTable { name_at: usize },
    Skipped(&'static str),
    Unknown,
}

const TABLE_MODIFIERS: &[&str] = &[
    "or", "replace", "temp", "temporary", "global", "local", "unlogged", "external", "virtual",
    "transient", "volatile", "multiset", "set", "if", "not", "exists",
];

fn classify(stmt: &[Token]) -> StatementKind {
    let first = &stmt[0];
    if first.is_kw("create") {
        let mut i = 1;
        while i < stmt.len() && TABLE_MODIFIERS.iter().any(|m| stmt[i].is_kw(m)) {
            i += 1;
        }
        if i < stmt.len() && stmt[i].is_kw("table") {
            let mut j = i + 1;
            // IF NOT EXISTS after TABLE
            if stmt.get(j).is_some_and(|t| t.is_kw("if")) {
                j += 1;
                while stmt.get(j).is_some_and(|t| t.is_kw("not") || t.is_kw("exists")) {
                    j += 1;
                }
            }
            return StatementKind::CreateTable { name_at: j };
        }
        let what = stmt[1..]
            .iter()
            .find_map(|t| match &t.tok {
                Tok::Word(w) => {
                    let w = w.to_ascii_lowercase();
                    match w.as_str() {
                        "index" => Some("CREATE INDEX"),
                        "view" => Some("CREATE VIEW"),
                        "sequence" => Some("CREATE SEQUENCE"),
                        "schema" | "database" => Some("CREATE SCHEMA"),
                        "trigger" => Some("CREATE TRIGGER"),
                        "function" | "procedure" => Some("CREATE FUNCTION"),
                        "type" | "domain" => Some("CREATE TYPE"),
                        "extension" => Some("CREATE EXTENSION"),
                        _ => None,
                    }
                }
                _ => None,
            })
            .unwrap_or("CREATE");
        return StatementKind::Skipped(what);
    }
    const SKIPPED: &[(&str, &str)] = &[
        ("alter", "ALTER"),
        ("insert", "INSERT"),
        ("drop", "DROP"),
        ("update", "UPDATE"),
        ("delete", "DELETE"),
        ("set", "SET"),
        ("use", "USE"),
        ("grant", "GRANT"),
        ("revoke", "REVOKE"),
        ("comment", "COMMENT"),
        ("lock", "LOCK"),
        ("unlock", "UNLOCK"),
        ("begin", "BEGIN"),
        ("start", "START"),
        ("commit", "COMMIT"),
        ("rollback", "ROLLBACK"),
        ("select", "SELECT"),
        ("truncate", "TRUNCATE"),
        ("pragma", "PRAGMA"),
        ("go", "GO"),
        ("declare", "DECLARE"),
        ("copy", "COPY"),
        ("with", "WITH"),
        ("analyze", "ANALYZE"),
        ("vacuum", "VACUUM"),
    ];
    for (kw, what) in SKIPPED {
        if first.is_kw(kw) {
            return StatementKind::Skipped(what);
        }
    }
    StatementKind::Unknown
}

struct ParsedColumn {
    name: String,
    type_words: Vec<String>,
    raw_type: String,
    constraints: BTreeSet<Constraint>,
    comment: Option<String>,
}

struct ParsedTable {
    name: String,
    columns: Vec<ParsedColumn>,
    comment: Option<String>,
    warnings: Vec<(Severity, DiagnosticCode, String)>,
}

type StmtError = (DiagnosticCode, String);

fn parse_create_table(stmt: &[Token], name_at: usize) -> Result<ParsedTable, StmtError> {
    // Qualified names keep their last part: `db.schema.table` -> `table`.
    let mut i = name_at;
    let mut name = None;
    while let Some(tok) = stmt.get(i) {
        match tok.ident() {
            Some(part) => name = Some(part),
            None => break,
        }
        i += 1;
        if stmt.get(i).is_some_and(|t| t.is_punct('.')) {
            i += 1;
        } else {
            break;
        }
    }
    let name = name.ok_or_else(|| {
        (
            DiagnosticCode::Unrecoverable,
            "CREATE TABLE without a table name".to_string(),
        )
    })?;

    let Some(open) = stmt[i..].iter().position(|t| t.is_punct('(')).map(|p| p + i) else {
        let how = if stmt[i..].iter().any(|t| t.is_kw("as")) {
            "CREATE TABLE ... AS has no column list"
        } else if stmt[i..].iter().any(|t| t.is_kw("like")) {
            "CREATE TABLE ... LIKE has no column list"
        } else {
            "CREATE TABLE without a column list"
        };
        return Err((DiagnosticCode::NoColumns, format!("table `{name}`: {how}")));
    };
    if stmt[i..open].iter().any(|t| t.is_kw("as")) {
        return Err((
            DiagnosticCode::NoColumns,
            format!("table `{name}`: CREATE TABLE ... AS has no column list"),
        ));
    }

    let mut warnings = Vec::new();
    let mut depth = 0;
    let mut close = None;
    for (k, tok) in stmt.iter().enumerate().skip(open) {
        if tok.is_punct('(') {
            depth += 1;
        } else if tok.is_punct(')') {
            depth -= 1;
            if depth == 0 {
                close = Some(k);
                break;
            }
        }
    }
    let body_end = match close {
        Some(k) => k,
        None => {
            warnings.push((
                Severity::Warning,
                DiagnosticCode::UnterminatedBody,
                format!("table `{name}`: column list is not closed"),
            ));
            stmt.len()
        }
    };

    let mut columns: Vec<ParsedColumn> = Vec::new();
    let mut table_level: Vec<(Constraint, Vec<String>)> = Vec::new();
    for element in split_top_level(&stmt[open + 1..body_end]) {
        if element.is_empty() {
            continue;
        }
        match parse_element(element) {
            Element::Column(col) => {
                if columns.iter().any(|c| c.name == col.name) {
                    warnings.push((
                        Severity::Warning,
                        DiagnosticCode::DuplicateColumn,
                        format!("table `{name}`: duplicate column `{}` ignored", col.name),
                    ));
                } else {
                    columns.push(col);
                }
            }
            Element::Constraint(kind, cols) => table_level.push((kind, cols)),
            Element::Ignored => {}
            Element::Invalid(why) => warnings.push((
                Severity::Warning,
                DiagnosticCode::IgnoredElement,
                format!("table `{name}`: {why}"),
            )),
        }
    }

    if columns.is_empty() {
        return Err((
            DiagnosticCode::NoColumns,
            format!("table `{name}` has no parseable columns"),
        ));
    }

    for (kind, cols) in table_level {
        let single = cols.len() == 1;
        for col_name in &cols {
            let Some(col) = columns
                .iter_mut()
                .find(|c| &c.name == col_name || c.name.to_lowercase() == col_name.to_lowercase())
            else {
                warnings.push((
                    Severity::Warning,
                    DiagnosticCode::IgnoredElement,
                    format!("table `{name}`: constraint references unknown column `{col_name}`"),
                ));
                continue;
            };
            // a composite UNIQUE does not make each member unique
            if kind != Constraint::Unique || single {
                col.constraints.insert(kind);
            }
        }
    }

    let comment = close.and_then(|k| table_comment(&stmt[k + 1..]));
    Ok(ParsedTable {
        name,
        columns,
        comment,
        warnings,
    })
}

fn table_comment(options: &[Token]) -> Option<String> {
    let pos = options.iter().position(|t| t.is_kw("comment"))?;
    options[pos + 1..].iter().take(2).find_map(|t| match &t.tok {
        Tok::Str(s) => Some(s.clone()),
        _ => None,
    })
}

fn split_top_level(tokens: &[Token]) -> Vec<&[Token]> {
    let mut parts = Vec::new();
    let mut depth = 0;
    let mut start = 0;
    for (i, tok) in tokens.iter().enumerate() {
        match tok.tok {
            Tok::Punct('(') => depth += 1,
            Tok::Punct(')') => depth -= 1,
            Tok::Punct(',') if depth == 0 => {
                parts.push(&tokens[start..i]);
                start = i + 1;
            }
            _ => {}
        }
    }
    parts.push(&tokens[start..]);
    parts
}

enum Element {
    Column(ParsedColumn),
    Constraint(Constraint, Vec<String>),
    Ignored,
    Invalid(String),
}

/// Words that end a column's type and start its constraint list.
const COLUMN_STOP: &[&str] = &[
    "primary", "not", "null", "unique", "default", "references", "comment", "check",
    "constraint", "collate", "auto_increment", "autoincrement", "generated", "identity", "on",
    "as", "key", "encode", "sortkey", "distkey", "storage", "compression", "index",
];

fn parse_element(el: &[Token]) -> Element {
    let first = &el[0];
    let mut i = 0;
    if first.is_kw("constraint") {
        // CONSTRAINT name <table constraint>
        i = 2;
        if i >= el.len() {
            return Element::Invalid("dangling CONSTRAINT".into());
        }
    }
    let head = &el[i];
    let next_is = |kw: &str| el.get(i + 1).is_some_and(|t| t.is_kw(kw));
    if head.is_kw("primary") && next_is("key") {
        return Element::Constraint(Constraint::PrimaryKey, column_list(&el[i + 2..]));
    }
    if head.is_kw("foreign") && next_is("key") {
        return Element::Constraint(Constraint::ForeignKey, column_list(&el[i + 2..]));
    }
    if head.is_kw("unique") && matches!(head.tok, Tok::Word(_)) {
        return Element::Constraint(Constraint::Unique, column_list(&el[i + 1..]));
    }
    if i > 0 || (matches!(head.tok, Tok::Word(_))
        && ["key", "index", "check", "fulltext", "spatial", "exclude", "period", "like"]
            .iter()
            .any(|kw| head.is_kw(kw))
        && !el.get(1).is_some_and(|t| matches!(t.tok, Tok::Word(_)) && is_type_word(t)))
    {
        return Element::Ignored;
    }

    let Some(name) = head.ident() else {
        return Element::Invalid(format!("expected a column name, found {:?}", head.tok));
    };

    let mut type_words: Vec<String> = Vec::new();
    let mut j = 1;
    while let Some(tok) = el.get(j) {
        match &tok.tok {
            Tok::Word(w) if !COLUMN_STOP.iter().any(|s| tok.is_kw(s)) => {
                if (tok.is_kw("character") || tok.is_kw("char"))
                    && el.get(j + 1).is_some_and(|t| t.is_kw("set"))
                {
                    break;
                }
                type_words.push(w.clone());
                j += 1;
            }
            Tok::Quoted(q) if type_words.is_empty() => {
                type_words.push(q.clone());
                j += 1;
            }
            Tok::Punct('(') => j += skip_group(&el[j..]),
            Tok::Punct('[') | Tok::Punct(']') | Tok::Punct('.') => j += 1,
            _ => break,
        }
    }

    let raw_type = type_words.join(" ");

    let mut constraints = BTreeSet::new();
    let mut comment = None;
    while j < el.len() {
        let tok = &el[j];
        if tok.is_punct('(') {
            j += skip_group(&el[j..]);
            continue;
        }
        if tok.is_kw("primary") && el.get(j + 1).is_some_and(|t| t.is_kw("key")) {
            constraints.insert(Constraint::PrimaryKey);
            j += 2;
            continue;
        }
        if tok.is_kw("not") && el.get(j + 1).is_some_and(|t| t.is_kw("null")) {
            constraints.insert(Constraint::NotNull);
            j += 2;
            continue;
        }
        if tok.is_kw("unique") {
            constraints.insert(Constraint::Unique);
        } else if tok.is_kw("default") {
            constraints.insert(Constraint::DefaultPresent);
            // the default value may itself look like a keyword (NULL, CURRENT_TIMESTAMP)
            j += 2;
            continue;
        } else if tok.is_kw("references") {
            constraints.insert(Constraint::ForeignKey);
        } else if tok.is_kw("check") {
            j += 1;
            if el.get(j).is_some_and(|t| t.is_punct('(')) {
                j += skip_group(&el[j..]);
            }
            continue;
        } else if tok.is_kw("comment") {
            if let Some(Tok::Str(s)) = el.get(j + 1).map(|t| &t.tok) {
                comment = Some(s.clone());
                j += 2;
                continue;
            }
        }
        j += 1;
    }

    Element::Column(ParsedColumn {
        name,
        type_words,
        raw_type,
        constraints,
        comment,
    })
}

fn is_type_word(tok: &Token) -> bool {
    match &tok.tok {
        Tok::Word(w) => normalize_type(&[w.as_str()]) != super::model::NormalizedType::Other,
        _ => false,
    }
}

/// Length of the balanced parenthesized group starting at `tokens[0]`.
fn skip_group(tokens: &[Token]) -> usize {
    let mut depth = 0;
    for (i, tok) in tokens.iter().enumerate() {
        if tok.is_punct('(') {
            depth += 1;
        } else if tok.is_punct(')') {
            depth -= 1;
            if depth == 0 {
                return i + 1;
            }
        }
    }
    tokens.len()
}

/// Identifiers inside the first parenthesized group.
fn column_list(tokens: &[Token]) -> Vec<String> {
    let Some(open) = tokens.iter().position(|t| t.is_punct('(')) else {
        return Vec::new();
    };
    let len = skip_group(&tokens[open..]);
    let inner = &tokens[open + 1..open + len.saturating_sub(1).max(1)];
    split_top_level(inner)
        .into_iter()
        .filter_map(|part| part.first().and_then(Token::ident))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::model::NormalizedType;

    fn parse(sql: &str) -> ParsedSource {
        parse_ddl(sql.as_bytes(), "shop", &ParseOptions::new("shop.sql")).unwrap()
    }

    #[test]
    fn minimal_statement() {
        let out = parse("CREATE TABLE users (id INT PRIMARY KEY, email VARCHAR(255));");
        assert_eq!(out.tables.len(), 1);
        assert_eq!(out.tables[0].name, "users");
        assert_eq!(out.columns.len(), 2);
        assert_eq!(out.columns[0].declared_type, NormalizedType::Integer);
        assert_eq!(
            out.columns[0].constraints,
            BTreeSet::from([Constraint::PrimaryKey])
        );
        assert_eq!(out.columns[1].declared_type, NormalizedType::Text);
        assert!(out.columns[1].constraints.is_empty());
        assert!(out.diagnostics.is_empty());
        assert_eq!(out.source.table_count, 1);
    }

    #[test]
    fn garbage_between_statements_yields_one_diagnostic() {
        let out = parse("CREATE TABLE a (x INT); GARBAGE???; CREATE TABLE b (y TEXT);");
        let names: Vec<_> = out.tables.iter().map(|t| t.name.as_str()).collect();
        assert_eq!(names, ["a", "b"]);
        assert_eq!(out.diagnostics.len(), 1);
        assert_eq!(out.diagnostics[0].code, DiagnosticCode::Unrecoverable);
        assert_eq!(out.diagnostics[0].statement_index, 1);
    }

    #[test]
    fn empty_input_is_an_error() {
        assert_eq!(
            parse_ddl(b"", "s", &ParseOptions::new("s.sql")),
            Err(IngestError::EmptyInput)
        );
    }

    #[test]
    fn invalid_utf8_strict_vs_lossy() {
        let bytes = b"CREATE TABLE t (a INT COMMENT '\xff');";
        let strict = parse_ddl(bytes, "s", &ParseOptions::new("s.sql").strict_utf8());
        assert!(matches!(strict, Err(IngestError::Encoding { .. })));
        let lossy = parse_ddl(bytes, "s", &ParseOptions::new("s.sql")).unwrap();
        assert_eq!(lossy.tables.len(), 1);
    }

    #[test]
    fn case_folding_quoted_vs_unquoted() {
        let out = parse(r#"CREATE TABLE Users ("UserId" INT, `Mixed` TEXT, [Br] INT, Plain INT);"#);
        assert_eq!(out.tables[0].name, "users");
        let names: Vec<_> = out.columns.iter().map(|c| c.name.as_str()).collect();
        assert_eq!(names, ["UserId", "Mixed", "Br", "plain"]);
    }

    #[test]
    fn composite_keys_comments_and_defaults() {
        let out = parse(
            "CREATE TABLE IF NOT EXISTS `db`.`order_items` (
               `order_id` int(11) NOT NULL COMMENT 'owning order',
               `line_no` smallint NOT NULL DEFAULT '1',
               `sku` varchar(32) DEFAULT NULL,
               price decimal(10,2) unsigned NOT NULL DEFAULT 0.00,
               PRIMARY KEY (`order_id`, `line_no`),
               KEY `idx_sku` (`sku`),
               CONSTRAINT fk_o FOREIGN KEY (order_id) REFERENCES orders (id),
               UNIQUE KEY uq (sku)
             ) ENGINE=InnoDB DEFAULT CHARSET=utf8 COMMENT='order lines';",
        );
        assert!(out.diagnostics.is_empty(), "{:?}", out.diagnostics);
        let t = &out.tables[0];
        assert_eq!(t.name, "order_items");
        assert_eq!(t.comment.as_deref(), Some("order lines"));
        let c = &out.columns;
        assert_eq!(c.len(), 4);
        assert_eq!(c[0].comment.as_deref(), Some("owning order"));
        assert_eq!(
            c[0].constraints,
            BTreeSet::from([Constraint::PrimaryKey, Constraint::ForeignKey, Constraint::NotNull])
        );
        assert_eq!(
            c[1].constraints,
            BTreeSet::from([Constraint::PrimaryKey, Constraint::NotNull, Constraint::DefaultPresent])
        );
        assert_eq!(
            c[2].constraints,
            BTreeSet::from([Constraint::DefaultPresent, Constraint::Unique])
        );
        assert_eq!(c[3].declared_type, NormalizedType::Decimal);
        assert_eq!(c[3].ordinal, 3);
    }

    #[test]
    fn postgres_flavoured_types() {
        let out = parse(
            "CREATE TABLE public.events (
                id bigserial PRIMARY KEY,
                at timestamp with time zone DEFAULT now() NOT NULL,
                tags text[],
                amount double precision,
                note character varying(20) COLLATE \"C\",
                flag boolean DEFAULT false
             );",
        );
        let types: Vec<_> = out.columns.iter().map(|c| c.declared_type).collect();
        assert_eq!(
            types,
            [
                NormalizedType::Integer,
                NormalizedType::Datetime,
                NormalizedType::Text,
                NormalizedType::Float,
                NormalizedType::Text,
                NormalizedType::Boolean
            ]
        );
        assert!(out.columns[1].has(Constraint::NotNull));
        assert!(out.columns[1].has(Constraint::DefaultPresent));
    }

    #[test]
    fn skipped_statements_get_info_diagnostics() {
        let out = parse(
            "DROP TABLE IF EXISTS t;
             CREATE TABLE t (a INT);
             CREATE INDEX i ON t (a);
             ALTER TABLE t ADD COLUMN b INT;
             INSERT INTO t VALUES (1);",
        );
        assert_eq!(out.tables.len(), 1);
        assert_eq!(out.diagnostics.len(), 4);
        assert!(out.diagnostics.iter().all(|d| d.code == DiagnosticCode::SkippedStatement));
    }

    #[test]
    fn duplicate_tables_keep_first() {
        let out = parse("CREATE TABLE t (a INT); CREATE TABLE T (b INT, c INT);");
        assert_eq!(out.tables.len(), 1);
        assert_eq!(out.columns.len(), 1);
        assert_eq!(out.columns[0].name, "a");
        assert_eq!(out.diagnostics[0].code, DiagnosticCode::DuplicateTable);
    }

    #[test]
    fn missing_semicolon_and_unclosed_body_recover() {
        let out = parse("CREATE TABLE a (x INT) CREATE TABLE b (y INT, z TEXT CREATE TABLE c (w INT);");
        let names: Vec<_> = out.tables.iter().map(|t| t.name.as_str()).collect();
        assert_eq!(names, ["a", "b", "c"]);
        assert_eq!(out.diagnostics.len(), 1);
        assert_eq!(out.diagnostics[0].code, DiagnosticCode::UnterminatedBody);
    }

    #[test]
    fn tables_without_columns_are_diagnosed() {
        let out = parse("CREATE TABLE a AS SELECT 1; CREATE TABLE b (); CREATE TABLE c LIKE a;");
        assert!(out.tables.is_empty());
        assert_eq!(out.diagnostics.len(), 3);
        assert!(out.diagnostics.iter().all(|d| d.code == DiagnosticCode::NoColumns));
    }

    #[test]
    fn comments_and_strings_do_not_split_statements() {
        let out = parse(
            "-- header; with semicolon
             /* block; comment */
             CREATE TABLE t (a TEXT DEFAULT 'x;y', b INT COMMENT 'it''s; fine'); # trailing",
        );
        assert_eq!(out.tables.len(), 1);
        assert_eq!(out.columns[1].comment.as_deref(), Some("it's; fine"));
        assert!(out.diagnostics.is_empty());
    }

    #[test]
    fn unterminated_quote_does_not_swallow_later_tables() {
        let out = parse("CREATE TABLE a (x INT COMMENT 'oops); CREATE TABLE b (y INT);");
        assert!(out.tables.iter().any(|t| t.name == "b"));
    }

    #[test]
    fn spans_cover_statements() {
        let sql = "CREATE TABLE a (x INT);\nCREATE TABLE b (y INT);";
        let out = parse(sql);
        let span = out.tables[1].raw_ddl_span;
        assert_eq!(&sql[span.start..span.end], "CREATE TABLE b (y INT)");
    }

    #[test]
    fn parsing_is_deterministic() {
        let sql = "CREATE TABLE a (x INT, y TEXT); CREATE TABLE b (z INT);";
        assert_eq!(parse(sql), parse(sql));
    }
}
