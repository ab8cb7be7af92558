//! The fixed keyword list behind the "contains an SQL keyword" n-gram filter.
//!
//! Changing this list changes every distribution, so it is versioned and the
//! version is echoed into reports.

use std::collections::BTreeSet;

pub const KEYWORDS_VERSION: u32 = 1;

/// Clause keywords, operators spelled as words, and the built-in functions
/// common in SQLite-based text-to-SQL corpora. All uppercase.
pub const SQL_KEYWORDS: &[&str] = &[
    // clauses and modifiers
    "SELECT",
    "FROM",
    "WHERE",
    "GROUP",
    "BY",
    "ORDER",
    "HAVING",
    "LIMIT",
    "OFFSET",
    "FETCH",
    "NEXT",
    "ONLY",
    "TOP",
    "PERCENT",
    "DISTINCT",
    "ALL",
    "AS",
    "ASC",
    "DESC",
    "NULLS",
    "FIRST",
    "LAST",
    "WITH",
    "RECURSIVE",
    "MATERIALIZED",
    "WINDOW",
    // joins
    "JOIN",
    "INNER",
    "LEFT",
    "RIGHT",
    "FULL",
    "OUTER",
    "CROSS",
    "NATURAL",
    "ON",
    "USING",
    // set operators
    "UNION",
    "INTERSECT",
    "EXCEPT",
    // predicates and logic
    "AND",
    "OR",
    "NOT",
    "IN",
    "IS",
    "NULL",
    "LIKE",
    "ILIKE",
    "GLOB",
    "REGEXP",
    "MATCH",
    "BETWEEN",
    "ESCAPE",
    "EXISTS",
    "ANY",
    "SOME",
    "ISNULL",
    "NOTNULL",
    // expressions
    "CASE",
    "WHEN",
    "THEN",
    "ELSE",
    "END",
    "CAST",
    "TRY_CAST",
    "INTERVAL",
    "EXTRACT",
    "CURRENT_DATE",
    "CURRENT_TIME",
    "CURRENT_TIMESTAMP",
    // window functions and frames
    "OVER",
    "PARTITION",
    "FILTER",
    "ROWS",
    "RANGE",
    "GROUPS",
    "UNBOUNDED",
    "PRECEDING",
    "FOLLOWING",
    "CURRENT",
    "ROW",
    "EXCLUDE",
    "ROW_NUMBER",
    "RANK",
    "DENSE_RANK",
    "PERCENT_RANK",
    "CUME_DIST",
    "NTILE",
    "LAG",
    "LEAD",
    "FIRST_VALUE",
    "LAST_VALUE",
    "NTH_VALUE",
    // aggregates
    "COUNT",
    "SUM",
    "AVG",
    "MIN",
    "MAX",
    "TOTAL",
    "GROUP_CONCAT",
    "STRING_AGG",
    // scalar built-ins
    "IIF",
    "IF",
    "COALESCE",
    "IFNULL",
    "NULLIF",
    "ROUND",
    "ABS",
    "LENGTH",
    "SUBSTR",
    "SUBSTRING",
    "UPPER",
    "LOWER",
    "TRIM",
    "LTRIM",
    "RTRIM",
    "REPLACE",
    "INSTR",
    "STRFTIME",
    "DATE",
    "TIME",
    "DATETIME",
    "JULIANDAY",
    // data modification
    "INSERT",
    "INTO",
    "VALUES",
    "UPDATE",
    "SET",
    "DELETE",
    "DEFAULT",
    "RETURNING",
];

/// Set of tokens counted as SQL keywords by the n-gram filter.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KeywordSet(BTreeSet<String>);

impl KeywordSet {
    /// Returns `None` for an empty set; the filter is undefined without keywords.
    pub fn new<I, S>(words: I) -> Option<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let set: BTreeSet<String> = words.into_iter().map(Into::into).collect();
        (!set.is_empty()).then_some(Self(set))
    }

    pub fn contains(&self, token: &str) -> bool {
        self.0.contains(token)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &str> {
        self.0.iter().map(String::as_str)
    }
}

impl Default for KeywordSet {
    fn default() -> Self {
        Self(SQL_KEYWORDS.iter().map(|s| s.to_string()).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shipped_list_is_uppercase() {
        for k in SQL_KEYWORDS {
            assert_eq!(*k, k.to_ascii_uppercase());
        }
        assert!(KeywordSet::default().contains("SELECT"));
        assert!(!KeywordSet::default().contains("select"));
    }

    #[test]
    fn empty_set_rejected() {
        assert!(KeywordSet::new(Vec::<String>::new()).is_none());
    }
}
