//! SQL tokenizer.
//!
//! Comments are dropped and trailing semicolons are stripped. Bare words are
//! not classified here: whether `date` is a keyword or a column depends on
//! where it appears, so the parser makes that call.

use super::ParseError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TokenKind {
    /// Unquoted word; keyword or identifier depending on context.
    Word,
    /// `"x"`, `` `x` `` or `[x]`.
    QuotedIdent,
    /// `'abc'`, `X'00'`, `N'abc'`.
    String,
    Number,
    /// `?`, `?1`, `:name`, `@name`, `$1`.
    Parameter,
    Operator,
    Comma,
    LParen,
    RParen,
    Dot,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub kind: TokenKind,
    pub text: String,
    /// Byte offset into the original query text.
    pub offset: usize,
}

impl Token {
    pub fn is_word(&self, upper: &str) -> bool {
        self.kind == TokenKind::Word && self.text.eq_ignore_ascii_case(upper)
    }

    pub fn is_op(&self, op: &str) -> bool {
        self.kind == TokenKind::Operator && self.text == op
    }
}

// Longest first.
const OPERATORS: &[&str] = &[
    "->>", "<>", "<=", ">=", "!=", "==", "||", "<<", ">>", "::", "->", "=", "<", ">", "+", "-",
    "*", "/", "%", "&", "|", "~",
];

pub fn tokenize(sql: &str) -> Result<Vec<Token>, ParseError> {
    let bytes = sql.as_bytes();
    let mut tokens = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let b = bytes[i];
        let start = i;
        match b {
            _ if b.is_ascii_whitespace() => {
                i += 1;
            }
            b'-' if bytes.get(i + 1) == Some(&b'-') => {
                while i < bytes.len() && bytes[i] != b'\n' {
                    i += 1;
                }
            }
            b'#' => {
                // MySQL line comment
                while i < bytes.len() && bytes[i] != b'\n' {
                    i += 1;
                }
            }
            b'/' if bytes.get(i + 1) == Some(&b'*') => match sql[i + 2..].find("*/") {
                Some(end) => i = i + 2 + end + 2,
                None => return Err(ParseError::new(start, "unterminated block comment")),
            },
            b';' => {
                // Only trailing semicolons are accepted.
                let rest = strip_comments_and_ws(&sql[i + 1..]);
                if !rest.chars().all(|c| c == ';') {
                    return Err(ParseError::new(
                        start,
                        "multiple statements are not supported",
                    ));
                }
                break;
            }
            b'\'' => {
                i = scan_quoted(bytes, i, b'\'')
                    .ok_or_else(|| ParseError::new(start, "unterminated string literal"))?;
                tokens.push(token(TokenKind::String, sql, start, i));
            }
            b'"' | b'`' => {
                i = scan_quoted(bytes, i, b)
                    .ok_or_else(|| ParseError::new(start, "unterminated quoted identifier"))?;
                tokens.push(token(TokenKind::QuotedIdent, sql, start, i));
            }
            b'[' => {
                let end = sql[i..]
                    .find(']')
                    .ok_or_else(|| ParseError::new(start, "unterminated bracketed identifier"))?;
                i += end + 1;
                tokens.push(token(TokenKind::QuotedIdent, sql, start, i));
            }
            b',' => {
                i += 1;
                tokens.push(token(TokenKind::Comma, sql, start, i));
            }
            b'(' => {
                i += 1;
                tokens.push(token(TokenKind::LParen, sql, start, i));
            }
            b')' => {
                i += 1;
                tokens.push(token(TokenKind::RParen, sql, start, i));
            }
            b'.' if !bytes.get(i + 1).is_some_and(u8::is_ascii_digit) || follows_name(&tokens) => {
                i += 1;
                tokens.push(token(TokenKind::Dot, sql, start, i));
            }
            b'0'..=b'9' | b'.' => {
                i = scan_number(bytes, i);
                if i < bytes.len() && is_word_byte(bytes[i]) {
                    return Err(ParseError::new(start, "malformed numeric literal"));
                }
                tokens.push(token(TokenKind::Number, sql, start, i));
            }
            b'?' => {
                i += 1;
                while i < bytes.len() && bytes[i].is_ascii_digit() {
                    i += 1;
                }
                tokens.push(token(TokenKind::Parameter, sql, start, i));
            }
            b':' | b'@' | b'$'
                if bytes
                    .get(i + 1)
                    .is_some_and(|&n| is_word_byte(n) || n == b'@')
                    && !(b == b':' && bytes.get(i + 1) == Some(&b':')) =>
            {
                i += 1;
                while i < bytes.len() && (is_word_byte(bytes[i]) || bytes[i] == b'@') {
                    i += 1;
                }
                tokens.push(token(TokenKind::Parameter, sql, start, i));
            }
            _ if is_word_start(b) => {
                // X'..' blobs and N'..' national strings
                if matches!(b, b'x' | b'X' | b'n' | b'N' | b'e' | b'E')
                    && bytes.get(i + 1) == Some(&b'\'')
                {
                    i = scan_quoted(bytes, i + 1, b'\'')
                        .ok_or_else(|| ParseError::new(start, "unterminated string literal"))?;
                    tokens.push(token(TokenKind::String, sql, start, i));
                    continue;
                }
                while i < bytes.len() && is_word_byte(bytes[i]) {
                    i += 1;
                }
                tokens.push(token(TokenKind::Word, sql, start, i));
            }
            _ => {
                let op = OPERATORS
                    .iter()
                    .find(|op| sql[i..].starts_with(**op))
                    .ok_or_else(|| {
                        let c = sql[i..].chars().next().unwrap_or('?');
                        ParseError::new(start, format!("unexpected character {c:?}"))
                    })?;
                i += op.len();
                tokens.push(token(TokenKind::Operator, sql, start, i));
            }
        }
    }
    Ok(tokens)
}

/// Whitespace-normalized form of a query: its tokens joined by single spaces.
pub fn normalize_whitespace(sql: &str) -> Result<String, ParseError> {
    Ok(tokenize(sql)?
        .iter()
        .map(|t| t.text.as_str())
        .collect::<Vec<_>>()
        .join(" "))
}

fn token(kind: TokenKind, sql: &str, start: usize, end: usize) -> Token {
    Token {
        kind,
        text: sql[start..end].to_string(),
        offset: start,
    }
}

fn is_word_start(b: u8) -> bool {
    b.is_ascii_alphabetic() || b == b'_' || b >= 0x80
}

fn is_word_byte(b: u8) -> bool {
    b.is_ascii_alphanumeric() || b == b'_' || b == b'$' || b >= 0x80
}

// `t.5` never happens in practice but `t1.col` must not lex `.col` as a number.
fn follows_name(tokens: &[Token]) -> bool {
    tokens.last().is_some_and(|t| {
        matches!(
            t.kind,
            TokenKind::Word | TokenKind::QuotedIdent | TokenKind::RParen
        )
    })
}

/// Returns the index just past the closing quote. A doubled quote is an escape.
fn scan_quoted(bytes: &[u8], open: usize, quote: u8) -> Option<usize> {
    let mut i = open + 1;
    while i < bytes.len() {
        if bytes[i] == quote {
            if bytes.get(i + 1) == Some(&quote) {
                i += 2;
                continue;
            }
            return Some(i + 1);
        }
        if bytes[i] == b'\\' && quote == b'\'' && i + 1 < bytes.len() {
            // MySQL-style backslash escape inside string literals
            i += 2;
            continue;
        }
        i += 1;
    }
    None
}

fn scan_number(bytes: &[u8], mut i: usize) -> usize {
    if bytes[i] == b'0' && matches!(bytes.get(i + 1), Some(b'x' | b'X')) {
        i += 2;
        while i < bytes.len() && bytes[i].is_ascii_hexdigit() {
            i += 1;
        }
        return i;
    }
    while i < bytes.len() && bytes[i].is_ascii_digit() {
        i += 1;
    }
    if i < bytes.len() && bytes[i] == b'.' {
        i += 1;
        while i < bytes.len() && bytes[i].is_ascii_digit() {
            i += 1;
        }
    }
    if i < bytes.len() && matches!(bytes[i], b'e' | b'E') {
        let mut j = i + 1;
        if j < bytes.len() && matches!(bytes[j], b'+' | b'-') {
            j += 1;
        }
        if j < bytes.len() && bytes[j].is_ascii_digit() {
            i = j;
            while i < bytes.len() && bytes[i].is_ascii_digit() {
                i += 1;
            }
        }
    }
    i
}

fn strip_comments_and_ws(rest: &str) -> String {
    let mut out = String::new();
    let mut chars = rest.char_indices().peekable();
    while let Some((idx, c)) = chars.next() {
        if c.is_whitespace() {
            continue;
        }
        if rest[idx..].starts_with("--") || c == '#' {
            for (_, n) in chars.by_ref() {
                if n == '\n' {
                    break;
                }
            }
            continue;
        }
        if rest[idx..].starts_with("/*") {
            if let Some(end) = rest[idx + 2..].find("*/") {
                let stop = idx + 2 + end + 2;
                while chars.peek().is_some_and(|&(j, _)| j < stop) {
                    chars.next();
                }
                continue;
            }
        }
        out.push(c);
    }
    out
}
