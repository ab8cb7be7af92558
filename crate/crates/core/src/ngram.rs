//! Filtered n-gram distributions over structural templates.
//!
//! All orders `1..=l_max` are pooled into a single frequency table. An n-gram
//! is kept only if it contains a keyword, neither starts nor ends with a
//! comma, and has as many `(` as `)`.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::keywords::KeywordSet;
use crate::template::StructuralTemplate;

pub const DEFAULT_L_MAX: usize = 15;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum NGramError {
    #[error("l_max must be at least 1")]
    InvalidLMax,
    #[error("no templates to build a distribution from")]
    NoTemplates,
    #[error("empty distribution: no n-gram survived filtering")]
    EmptyDistribution,
    #[error("malformed distribution file at line {line}: {message}")]
    Import { line: usize, message: String },
}

/// Contiguous run of template tokens.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NGram(Vec<String>);

impl NGram {
    pub fn new(tokens: Vec<String>) -> Self {
        Self(tokens)
    }

    pub fn tokens(&self) -> &[String] {
        &self.0
    }

    pub fn order(&self) -> usize {
        self.0.len()
    }

    /// Tokens joined by single spaces; the key used in distributions.
    pub fn key(&self) -> String {
        self.0.join(" ")
    }
}

impl fmt::Display for NGram {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.key())
    }
}

impl FromStr for NGram {
    type Err = std::convert::Infallible;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(Self(s.split_whitespace().map(str::to_string).collect()))
    }
}

/// Every window of length `1..=min(l_max, len)`, shortest first, unfiltered.
pub fn extract_ngrams(template: &StructuralTemplate, l_max: usize) -> Vec<NGram> {
    windows(template.tokens(), l_max)
        .map(|w| NGram(w.to_vec()))
        .collect()
}

fn windows(tokens: &[String], l_max: usize) -> impl Iterator<Item = &[String]> {
    (1..=l_max.min(tokens.len())).flat_map(move |n| tokens.windows(n))
}

pub fn is_valid_ngram(ngram: &NGram, keywords: &KeywordSet) -> bool {
    is_valid_window(ngram.tokens(), keywords)
}

fn is_valid_window(tokens: &[String], keywords: &KeywordSet) -> bool {
    let (Some(first), Some(last)) = (tokens.first(), tokens.last()) else {
        return false;
    };
    if first == "," || last == "," {
        return false;
    }
    let mut open = 0usize;
    let mut close = 0usize;
    let mut has_keyword = false;
    for t in tokens {
        match t.as_str() {
            "(" => open += 1,
            ")" => close += 1,
            other => has_keyword |= keywords.contains(other),
        }
    }
    has_keyword && open == close
}

/// Pooled n-gram frequencies of one query set.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NGramDistribution {
    counts: BTreeMap<String, u64>,
    total: u64,
    l_max: usize,
    source_label: String,
}

impl NGramDistribution {
    /// Builds a distribution directly from counts keyed by space-joined n-grams.
    /// Zero counts are dropped.
    pub fn from_counts(
        counts: impl IntoIterator<Item = (String, u64)>,
        l_max: usize,
        source_label: impl Into<String>,
    ) -> Result<Self, NGramError> {
        let mut map = BTreeMap::new();
        for (k, v) in counts {
            if v > 0 {
                *map.entry(k).or_insert(0) += v;
            }
        }
        let total = map.values().sum();
        if total == 0 {
            return Err(NGramError::EmptyDistribution);
        }
        Ok(Self {
            counts: map,
            total,
            l_max,
            source_label: source_label.into(),
        })
    }

    pub fn counts(&self) -> &BTreeMap<String, u64> {
        &self.counts
    }

    pub fn count(&self, key: &str) -> u64 {
        self.counts.get(key).copied().unwrap_or(0)
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn l_max(&self) -> usize {
        self.l_max
    }

    pub fn source_label(&self) -> &str {
        &self.source_label
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.source_label = label.into();
        self
    }

    pub fn vocabulary_size(&self) -> usize {
        self.counts.len()
    }

    /// Byte-stable JSON export with keys sorted.
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("distribution serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self, NGramError> {
        let raw: NGramDistribution =
            serde_json::from_str(text).map_err(|e| NGramError::Import {
                line: e.line(),
                message: e.to_string(),
            })?;
        // recompute the total rather than trusting the file
        Self::from_counts(raw.counts, raw.l_max, raw.source_label)
    }

    /// Tab-separated export: `# key value` header lines, then `ngram<TAB>count`
    /// sorted by n-gram.
    pub fn to_text(&self) -> String {
        let mut out = format!(
            "# l_max\t{}\n# source_label\t{}\n# total\t{}\n",
            self.l_max, self.source_label, self.total
        );
        for (k, v) in &self.counts {
            out.push_str(&format!("{k}\t{v}\n"));
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self, NGramError> {
        let mut l_max = DEFAULT_L_MAX;
        let mut label = String::new();
        let mut counts = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let err = |message: &str| NGramError::Import {
                line: i + 1,
                message: message.to_string(),
            };
            if line.is_empty() {
                continue;
            }
            if let Some(header) = line.strip_prefix("# ") {
                let (key, value) = header.split_once('\t').ok_or_else(|| err("bad header"))?;
                match key {
                    "l_max" => l_max = value.parse().map_err(|_| err("bad l_max"))?,
                    "source_label" => label = value.to_string(),
                    _ => {}
                }
                continue;
            }
            let (key, value) = line.rsplit_once('\t').ok_or_else(|| err("missing tab"))?;
            let value: u64 = value.parse().map_err(|_| err("bad count"))?;
            counts.push((key.to_string(), value));
        }
        Self::from_counts(counts, l_max, label)
    }
}

/// Accumulates filtered n-gram counts. Merging is plain count addition, so
/// partial builders from parallel workers combine in any order.
#[derive(Debug, Clone)]
pub struct DistributionBuilder {
    counts: HashMap<String, u64>,
    l_max: usize,
    keywords: KeywordSet,
}

impl DistributionBuilder {
    pub fn new(l_max: usize) -> Result<Self, NGramError> {
        Self::with_keywords(l_max, KeywordSet::default())
    }

    pub fn with_keywords(l_max: usize, keywords: KeywordSet) -> Result<Self, NGramError> {
        if l_max == 0 {
            return Err(NGramError::InvalidLMax);
        }
        Ok(Self {
            counts: HashMap::new(),
            l_max,
            keywords,
        })
    }

    pub fn add(&mut self, template: &StructuralTemplate) {
        self.add_weighted(template, 1);
    }

    /// Adds `times` copies of a template.
    pub fn add_weighted(&mut self, template: &StructuralTemplate, times: u64) {
        for w in windows(template.tokens(), self.l_max) {
            if is_valid_window(w, &self.keywords) {
                *self.counts.entry(w.join(" ")).or_insert(0) += times;
            }
        }
    }

    pub fn merge(mut self, other: Self) -> Self {
        let (mut big, small) = if self.counts.len() >= other.counts.len() {
            (std::mem::take(&mut self.counts), other.counts)
        } else {
            (other.counts, std::mem::take(&mut self.counts))
        };
        for (k, v) in small {
            *big.entry(k).or_insert(0) += v;
        }
        self.counts = big;
        self
    }

    pub fn finish(self, source_label: impl Into<String>) -> Result<NGramDistribution, NGramError> {
        NGramDistribution::from_counts(self.counts, self.l_max, source_label)
    }
}

/// Pools the valid n-grams of all templates into one distribution.
///
/// Duplicate templates contribute duplicate n-grams.
pub fn build_distribution(
    templates: &[StructuralTemplate],
    l_max: usize,
) -> Result<NGramDistribution, NGramError> {
    build_distribution_with(templates, l_max, &KeywordSet::default(), "")
}

pub fn build_distribution_with(
    templates: &[StructuralTemplate],
    l_max: usize,
    keywords: &KeywordSet,
    source_label: &str,
) -> Result<NGramDistribution, NGramError> {
    if templates.is_empty() {
        return Err(NGramError::NoTemplates);
    }
    let empty = DistributionBuilder::with_keywords(l_max, keywords.clone())?;
    // Corpora repeat templates heavily; count each distinct one once.
    let mut multiplicity: HashMap<&StructuralTemplate, u64> = HashMap::new();
    for t in templates {
        *multiplicity.entry(t).or_insert(0) += 1;
    }
    let distinct: Vec<_> = multiplicity.into_iter().collect();
    distinct
        .par_iter()
        .fold(
            || empty.clone(),
            |mut b, (t, n)| {
                b.add_weighted(t, *n);
                b
            },
        )
        .reduce(|| empty.clone(), DistributionBuilder::merge)
        .finish(source_label)
}
