use super::Diagnostic;

#[derive(Clone, Debug, PartialEq)]
pub enum Tok {
    Ident(String),
    Int(String),
    Float(String),
    Char(String),
    Str(String),
    LParen,
    RParen,
    LBrace,
    RBrace,
    Comma,
    Colon,
    Assign,
    Elvis,
    Semi,
    Newline,
    Eof,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Token {
    pub tok: Tok,
    pub line: usize,
}

/// Splits source text into tokens. Newlines inside parentheses are dropped
/// so expressions may span lines.
pub fn lex(src: &str) -> Result<Vec<Token>, Diagnostic> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let mut line = 1;
    let mut parens = 0usize;
    let mut i = 0;
    let syntax = |line: usize, msg: String| Diagnostic::new("SYNTAX", msg, line);
    while i < chars.len() {
        let c = chars[i];
        let start_line = line;
        let tok = match c {
            '\n' => {
                line += 1;
                i += 1;
                if parens == 0 {
                    out.push(Token {
                        tok: Tok::Newline,
                        line: start_line,
                    });
                }
                continue;
            }
            c if c.is_whitespace() => {
                i += 1;
                continue;
            }
            '/' if chars.get(i + 1) == Some(&'/') => {
                while i < chars.len() && chars[i] != '\n' {
                    i += 1;
                }
                continue;
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                let s = i;
                while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                    i += 1;
                }
                out.push(Token {
                    tok: Tok::Ident(chars[s..i].iter().collect()),
                    line,
                });
                continue;
            }
            c if c.is_ascii_digit() => {
                let s = i;
                while i < chars.len() && chars[i].is_ascii_digit() {
                    i += 1;
                }
                let mut float = false;
                if chars.get(i) == Some(&'.') && chars.get(i + 1).is_some_and(|d| d.is_ascii_digit()) {
                    float = true;
                    i += 1;
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        i += 1;
                    }
                }
                if matches!(chars.get(i), Some('f' | 'F')) {
                    float = true;
                    i += 1;
                }
                if chars.get(i).is_some_and(|d| d.is_ascii_alphanumeric() || *d == '_') {
                    return Err(syntax(
                        line,
                        format!(
                            "malformed number literal near '{}'",
                            chars[s..=i].iter().collect::<String>()
                        ),
                    ));
                }
                let text: String = chars[s..i].iter().collect();
                out.push(Token {
                    tok: if float { Tok::Float(text) } else { Tok::Int(text) },
                    line,
                });
                continue;
            }
            '"' => {
                let s = i;
                i += 1;
                while i < chars.len() && chars[i] != '"' && chars[i] != '\n' {
                    if chars[i] == '\\' {
                        i += 1;
                    }
                    i += 1;
                }
                if chars.get(i) != Some(&'"') {
                    return Err(syntax(line, "unterminated string literal".into()));
                }
                i += 1;
                out.push(Token {
                    tok: Tok::Str(chars[s..i].iter().collect()),
                    line,
                });
                continue;
            }
            '\'' => {
                let s = i;
                let len = if chars.get(i + 1) == Some(&'\\') { 2 } else { 1 };
                let close = i + 1 + len;
                if chars.get(close) != Some(&'\'') || chars.get(i + 1).is_none_or(|c| *c == '\'' || *c == '\n') {
                    return Err(syntax(line, "malformed character literal".into()));
                }
                i = close + 1;
                out.push(Token {
                    tok: Tok::Char(chars[s..i].iter().collect()),
                    line,
                });
                continue;
            }
            '?' if chars.get(i + 1) == Some(&':') => {
                i += 1;
                Tok::Elvis
            }
            '(' => {
                parens += 1;
                Tok::LParen
            }
            ')' => {
                parens = parens.saturating_sub(1);
                Tok::RParen
            }
            '{' => Tok::LBrace,
            '}' => Tok::RBrace,
            ',' => Tok::Comma,
            ':' => Tok::Colon,
            '=' => Tok::Assign,
            ';' => Tok::Semi,
            other => return Err(syntax(line, format!("unexpected character '{other}'"))),
        };
        i += 1;
        out.push(Token { tok, line: start_line });
    }
    out.push(Token { tok: Tok::Eof, line });
    Ok(out)
}
