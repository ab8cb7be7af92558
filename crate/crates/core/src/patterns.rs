//! Traceable query patterns and how their frequency shifts between corpora.
//!
//! Matching runs over the parse tree, so spacing, aliases and letter case in
//! the SQL text do not affect the result. The counting unit is the query: a
//! query with two `SUM` calls counts once.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use indexmap::IndexMap;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Corpus, ParseFailure};
use crate::template::{
    parse_sql, Branch, Category, Construct, Node, ParseError, SqlQuery, SyntaxTree,
};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PatternError {
    #[error("duplicate pattern id '{0}'")]
    DuplicateId(String),
    #[error("pattern sets differ: only before {only_before:?}, only after {only_after:?}")]
    SpecMismatch {
        only_before: Vec<String>,
        only_after: Vec<String>,
    },
    #[error("unknown pattern '{0}'")]
    UnknownMatcher(String),
}

/// Built-in tree predicates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Matcher {
    /// A plain column item followed by an item containing `SUM`.
    AttrCommaSum,
    /// A select list with `SUM` and no column outside an aggregate.
    /// Never true together with `AttrCommaSum`.
    BareSum,
    CountStar,
    /// `COUNT(col)` or `COUNT(DISTINCT col)`.
    CountAttr,
    CaseWhen,
    Iif,
    UnionOp,
    /// Any parenthesized `SELECT`, CTE bodies included.
    Subquery,
}

impl Matcher {
    pub const ALL: [Matcher; 8] = [
        Matcher::AttrCommaSum,
        Matcher::BareSum,
        Matcher::CountStar,
        Matcher::CountAttr,
        Matcher::CaseWhen,
        Matcher::Iif,
        Matcher::UnionOp,
        Matcher::Subquery,
    ];

    pub fn id(self) -> &'static str {
        match self {
            Matcher::AttrCommaSum => "attr_comma_sum",
            Matcher::BareSum => "bare_sum",
            Matcher::CountStar => "count_star",
            Matcher::CountAttr => "count_attr",
            Matcher::CaseWhen => "case_when",
            Matcher::Iif => "iif",
            Matcher::UnionOp => "union_op",
            Matcher::Subquery => "subquery",
        }
    }

    /// Short human label, as used in pattern tables.
    pub fn label(self) -> &'static str {
        match self {
            Matcher::AttrCommaSum => "att, SUM(exp)",
            Matcher::BareSum => "SUM(exp)",
            Matcher::CountStar => "COUNT(*)",
            Matcher::CountAttr => "COUNT(att)",
            Matcher::CaseWhen => "CASE WHEN",
            Matcher::Iif => "IIF",
            Matcher::UnionOp => "UNION",
            Matcher::Subquery => "Subqueries",
        }
    }
}

impl fmt::Display for Matcher {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for Matcher {
    type Err = PatternError;

    fn from_str(s: &str) -> Result<Self, PatternError> {
        Matcher::ALL
            .into_iter()
            .find(|m| m.id() == s)
            .ok_or_else(|| PatternError::UnknownMatcher(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PatternSpec {
    pub id: String,
    pub matcher: Matcher,
}

/// An ordered set of specs with unique ids.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PatternSet(Vec<PatternSpec>);

impl PatternSet {
    pub fn new(specs: Vec<PatternSpec>) -> Result<Self, PatternError> {
        let mut seen = BTreeSet::new();
        for s in &specs {
            if !seen.insert(s.id.as_str()) {
                return Err(PatternError::DuplicateId(s.id.clone()));
            }
        }
        Ok(Self(specs))
    }

    pub fn specs(&self) -> &[PatternSpec] {
        &self.0
    }
}

impl Default for PatternSet {
    /// Every built-in matcher, keyed by its own id.
    fn default() -> Self {
        Self(
            Matcher::ALL
                .into_iter()
                .map(|m| PatternSpec {
                    id: m.id().to_string(),
                    matcher: m,
                })
                .collect(),
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PatternCounts {
    pub corpus_name: String,
    /// Queries containing each pattern, in spec order.
    pub counts: IndexMap<String, u64>,
    pub queries: usize,
    pub parse_failures: Vec<ParseFailure>,
}

const AGGREGATES: &[&str] = &[
    "SUM",
    "COUNT",
    "AVG",
    "MIN",
    "MAX",
    "TOTAL",
    "GROUP_CONCAT",
    "STRING_AGG",
];

fn is_function(b: &Branch, name: &str) -> bool {
    matches!(&b.construct, Construct::Function(n) if n == name)
}

/// Pre-order branches under `node`, not descending into subqueries.
fn local_branches<'a>(node: &'a Node, out: &mut Vec<&'a Branch>) {
    if let Node::Branch(b) = node {
        out.push(b);
        if b.construct != Construct::Subquery {
            b.children.iter().for_each(|c| local_branches(c, out));
        }
    }
}

fn contains_sum(item: &Node) -> bool {
    let mut bs = Vec::new();
    local_branches(item, &mut bs);
    bs.into_iter().any(|b| is_function(b, "SUM"))
}

/// `col` or `t.col`, optionally aliased. `t.*` is not a plain column.
fn is_plain_column(item: &Branch) -> bool {
    match item.children.as_slice() {
        [first, rest @ ..] => {
            first.is_construct(&Construct::ObjectRef)
                && rest.iter().all(|n| n.is_construct(&Construct::Alias))
        }
        [] => false,
    }
}

/// True when some column reference sits outside every aggregate call.
fn has_bare_column(node: &Node) -> bool {
    match node {
        Node::Token(_) => false,
        Node::Branch(b) => match &b.construct {
            Construct::ObjectRef => true,
            Construct::Subquery => false,
            Construct::Function(name) if AGGREGATES.contains(&name.as_str()) => false,
            _ => b.children.iter().any(has_bare_column),
        },
    }
}

fn select_items(select: &Branch) -> Vec<&Branch> {
    select
        .child_branches()
        .filter(|b| b.construct == Construct::SelectItem)
        .collect()
}

fn attr_comma_sum(selects: &[&Branch]) -> bool {
    selects.iter().any(|s| {
        let items = select_items(s);
        items.iter().enumerate().any(|(i, item)| {
            is_plain_column(item)
                && items[i + 1..]
                    .iter()
                    .any(|later| later.children.iter().any(contains_sum))
        })
    })
}

fn bare_sum(selects: &[&Branch]) -> bool {
    selects.iter().any(|s| {
        let items = select_items(s);
        items
            .iter()
            .any(|item| item.children.iter().any(contains_sum))
            && !items
                .iter()
                .any(|item| item.children.iter().any(has_bare_column))
    })
}

fn count_args(b: &Branch) -> Option<&Branch> {
    if !is_function(b, "COUNT") {
        return None;
    }
    b.child_branches().find(|a| a.construct == Construct::Args)
}

fn is_count_star(b: &Branch) -> bool {
    count_args(b)
        .is_some_and(|args| matches!(args.children.as_slice(), [Node::Token(t)] if t.text == "*"))
}

fn is_count_attr(b: &Branch) -> bool {
    count_args(b).is_some_and(|args| {
        let operands: Vec<&Node> = args
            .children
            .iter()
            .filter(|n| {
                !n.as_token().is_some_and(|t| {
                    t.text.eq_ignore_ascii_case("DISTINCT") || t.text.eq_ignore_ascii_case("ALL")
                })
            })
            .collect();
        matches!(operands.as_slice(), [n] if n.is_construct(&Construct::ObjectRef))
    })
}

/// Ids of the patterns present in one parsed query, in spec order.
pub fn tree_patterns<'a>(tree: &SyntaxTree, set: &'a PatternSet) -> Vec<&'a str> {
    let branches = tree.branches();
    let selects: Vec<&Branch> = branches
        .iter()
        .copied()
        .filter(|b| b.construct == Construct::Select)
        .collect();
    let attr = attr_comma_sum(&selects);
    set.specs()
        .iter()
        .filter(|spec| match spec.matcher {
            Matcher::AttrCommaSum => attr,
            Matcher::BareSum => !attr && bare_sum(&selects),
            Matcher::CountStar => branches.iter().any(|b| is_count_star(b)),
            Matcher::CountAttr => branches.iter().any(|b| is_count_attr(b)),
            Matcher::CaseWhen => branches.iter().any(|b| b.construct == Construct::Case),
            Matcher::Iif => branches.iter().any(|b| is_function(b, "IIF")),
            Matcher::UnionOp => tree.tokens().iter().any(|t| {
                t.category == Category::Structural && t.text.eq_ignore_ascii_case("UNION")
            }),
            Matcher::Subquery => branches.iter().any(|b| b.construct == Construct::Subquery),
        })
        .map(|spec| spec.id.as_str())
        .collect()
}

/// Parses `sql` and reports which patterns it contains.
pub fn query_patterns<'a>(sql: &str, set: &'a PatternSet) -> Result<Vec<&'a str>, ParseError> {
    let tree = parse_sql(&SqlQuery::new(sql)?)?;
    Ok(tree_patterns(&tree, set))
}

/// Counts queries per pattern. Unparseable queries match nothing and are
/// listed in `parse_failures`.
pub fn count_patterns(corpus: &Corpus, set: &PatternSet) -> PatternCounts {
    let per_query: Vec<Result<Vec<&str>, ParseError>> = corpus
        .records()
        .par_iter()
        .map(|r| query_patterns(&r.sql, set))
        .collect();
    let mut counts: IndexMap<String, u64> = set.specs().iter().map(|s| (s.id.clone(), 0)).collect();
    let mut parse_failures = Vec::new();
    for (index, result) in per_query.into_iter().enumerate() {
        match result {
            Ok(ids) => ids.into_iter().for_each(|id| counts[id] += 1),
            Err(e) => parse_failures.push(ParseFailure {
                index,
                message: e.to_string(),
            }),
        }
    }
    PatternCounts {
        corpus_name: corpus.name.clone(),
        counts,
        queries: corpus.len(),
        parse_failures,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Up,
    Down,
    Flat,
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Direction::Up => "up",
            Direction::Down => "down",
            Direction::Flat => "flat",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PatternDelta {
    pub pattern_id: String,
    pub before: u64,
    pub after: u64,
    pub delta: i64,
    pub direction: Direction,
}

/// Per-pattern change from `before` to `after`, in the order of `before`.
pub fn diff_pattern_counts(
    before: &PatternCounts,
    after: &PatternCounts,
) -> Result<Vec<PatternDelta>, PatternError> {
    let only_before: Vec<String> = before
        .counts
        .keys()
        .filter(|k| !after.counts.contains_key(*k))
        .cloned()
        .collect();
    let only_after: Vec<String> = after
        .counts
        .keys()
        .filter(|k| !before.counts.contains_key(*k))
        .cloned()
        .collect();
    if !only_before.is_empty() || !only_after.is_empty() {
        return Err(PatternError::SpecMismatch {
            only_before,
            only_after,
        });
    }
    Ok(before
        .counts
        .iter()
        .map(|(id, &b)| {
            let a = after.counts[id];
            let delta = a as i64 - b as i64;
            PatternDelta {
                pattern_id: id.clone(),
                before: b,
                after: a,
                delta,
                direction: match delta.signum() {
                    1 => Direction::Up,
                    -1 => Direction::Down,
                    _ => Direction::Flat,
                },
            }
        })
        .collect())
}

/// `pattern_id,before,after,delta,direction` with a header row.
pub fn deltas_to_csv(rows: &[PatternDelta]) -> String {
    let mut out = String::from("pattern_id,before,after,delta,direction\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            r.pattern_id, r.before, r.after, r.delta, r.direction
        ));
    }
    out
}
