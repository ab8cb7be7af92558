//! Structural query templates.
//!
//! A query is parsed into a [`SyntaxTree`] whose nodes are tagged either
//! structural or leaf. Dropping the leaves (table and column names, aliases,
//! literals, type names) leaves the [`StructuralTemplate`]:
//!
//! ```
//! use sqlalign::template::templatize;
//!
//! let t = templatize("SELECT a, SUM(b) FROM t GROUP BY a").unwrap();
//! assert_eq!(t.canonical_text(), "SELECT , SUM ( ) FROM GROUP BY");
//! ```

mod lexer;
mod parser;
mod tree;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use lexer::{normalize_whitespace, tokenize, Token, TokenKind};
pub use tree::{Branch, Category, Construct, Node, SyntaxTree, TreeToken};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("parse error at byte {position}: {message}")]
pub struct ParseError {
    pub position: usize,
    pub message: String,
}

impl ParseError {
    pub fn new(position: usize, message: impl Into<String>) -> Self {
        Self {
            position,
            message: message.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Dialect {
    #[default]
    Sqlite,
    Generic,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SqlQuery {
    text: String,
    dialect: Dialect,
}

impl SqlQuery {
    pub fn new(text: impl Into<String>) -> Result<Self, ParseError> {
        Self::with_dialect(text, Dialect::default())
    }

    pub fn with_dialect(text: impl Into<String>, dialect: Dialect) -> Result<Self, ParseError> {
        let text = text.into();
        if text.trim().is_empty() {
            return Err(ParseError::new(0, "empty query"));
        }
        Ok(Self { text, dialect })
    }

    pub fn text(&self) -> &str {
        &self.text
    }

    pub fn dialect(&self) -> Dialect {
        self.dialect
    }
}

/// Uppercased structural tokens of a query, in source order.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct StructuralTemplate {
    tokens: Vec<String>,
}

impl StructuralTemplate {
    /// Builds a template from already-canonical tokens, e.g. one read back
    /// from a templates file.
    pub fn from_tokens(tokens: Vec<String>) -> Self {
        Self { tokens }
    }

    /// Parses a canonical text line (tokens separated by single spaces).
    pub fn from_canonical_text(text: &str) -> Self {
        Self {
            tokens: text.split_whitespace().map(str::to_string).collect(),
        }
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn canonical_text(&self) -> String {
        self.tokens.join(" ")
    }
}

impl fmt::Display for StructuralTemplate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.canonical_text())
    }
}

/// Parses a query into a categorized syntax tree.
///
/// Both dialect tags currently accept the same grammar.
pub fn parse_sql(query: &SqlQuery) -> Result<SyntaxTree, ParseError> {
    parser::parse(query.text())
}

/// Removes the leaf nodes of a tree, keeping structural tokens in source order.
pub fn derive_template(tree: &SyntaxTree) -> StructuralTemplate {
    StructuralTemplate {
        tokens: tree
            .structural_tokens()
            .into_iter()
            .map(TreeToken::canonical)
            .collect(),
    }
}

/// Parse and derive in one step.
pub fn templatize(sql: &str) -> Result<StructuralTemplate, ParseError> {
    let query = SqlQuery::new(sql)?;
    Ok(derive_template(&parse_sql(&query)?))
}
