//! Lightweight tokenizer over rendered program text.

pub const KEYWORDS: &[&str] = &["fun", "val", "var", "return", "if", "else", "true", "false"];

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Token<'a> {
    Ident(&'a str),
    Literal(&'a str),
    Punct(&'a str),
}

/// Splits a line into identifiers, literals and punctuation. String and char
/// literals are kept whole so their contents never look like identifiers.
pub fn tokens(text: &str) -> Vec<Token<'_>> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        if c.is_ascii_whitespace() {
            i += 1;
        } else if c.is_ascii_alphabetic() || c == b'_' {
            let start = i;
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            out.push(Token::Ident(&text[start..i]));
        } else if c.is_ascii_digit() {
            let start = i;
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'.') {
                i += 1;
            }
            out.push(Token::Literal(&text[start..i]));
        } else if c == b'"' || c == b'\'' {
            let start = i;
            i += 1;
            while i < bytes.len() && bytes[i] != c {
                i += 1;
            }
            i = (i + 1).min(bytes.len());
            out.push(Token::Literal(&text[start..i]));
        } else if c == b'?' && bytes.get(i + 1) == Some(&b':') {
            out.push(Token::Punct(&text[i..i + 2]));
            i += 2;
        } else {
            let len = text[i..].chars().next().map_or(1, char::len_utf8);
            out.push(Token::Punct(&text[i..i + len]));
            i += len;
        }
    }
    out
}

/// Identifiers used (not declared) in a line: keywords, names right after
/// `fun`/`val`/`var`, parameter names (followed by `:`) and type
/// annotations (preceded by `:`) are excluded.
pub fn referenced_identifiers(text: &str) -> std::collections::BTreeSet<String> {
    let toks = tokens(text);
    let mut out = std::collections::BTreeSet::new();
    for (i, t) in toks.iter().enumerate() {
        let Token::Ident(name) = t else { continue };
        if KEYWORDS.contains(name) {
            continue;
        }
        let prev = i.checked_sub(1).map(|j| &toks[j]);
        let next = toks.get(i + 1);
        let declared = matches!(prev, Some(Token::Ident(k)) if ["fun", "val", "var"].contains(k));
        let annotation = matches!(prev, Some(Token::Punct(":")));
        let param = matches!(next, Some(Token::Punct(":")));
        if !(declared || annotation || param) {
            out.insert(name.to_string());
        }
    }
    out
}
