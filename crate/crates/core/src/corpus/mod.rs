//! Text-to-SQL corpora: loading, sampling and the templating pipeline.

mod load;
mod pipeline;
mod sample;

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ngram::NGramError;

pub use load::{load_corpus, parse_corpus, write_corpus, Container, FormatSpec};
pub use pipeline::{templatize_corpus, ParseFailure, ParseReport, Templatized};
pub use sample::{sample_corpus, SampleMode, SampleSpec};

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("row {row}: {message}")]
    Format { row: usize, message: String },
    #[error("malformed {container} input: {message}")]
    Container { container: String, message: String },
    #[error("corpus '{0}' has no records")]
    Empty(String),
    #[error("invalid sample spec: {0}")]
    InvalidSample(String),
    #[error("EmptyDistribution: no usable n-grams in corpus '{0}'")]
    EmptyDistribution(String),
    #[error(transparent)]
    NGram(#[from] NGramError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CorpusKind {
    Train,
    Target,
    Prediction,
}

impl fmt::Display for CorpusKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CorpusKind::Train => "train",
            CorpusKind::Target => "target",
            CorpusKind::Prediction => "prediction",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusRecord {
    /// Empty for prediction dumps.
    pub question: String,
    pub sql: String,
    /// Database id or domain, used for grouped sampling.
    pub group_id: String,
    /// Every other field of the source row.
    pub meta: BTreeMap<String, serde_json::Value>,
}

impl CorpusRecord {
    pub fn new(sql: impl Into<String>) -> Self {
        Self {
            question: String::new(),
            sql: sql.into(),
            group_id: String::new(),
            meta: BTreeMap::new(),
        }
    }

    pub fn in_group(mut self, group_id: impl Into<String>) -> Self {
        self.group_id = group_id.into();
        self
    }
}

/// A non-fatal row problem recorded while loading with `skip_bad_rows`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SkippedRow {
    pub row: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    pub name: String,
    pub kind: CorpusKind,
    records: Vec<CorpusRecord>,
    skipped: Vec<SkippedRow>,
}

impl Corpus {
    pub fn new(
        name: impl Into<String>,
        kind: CorpusKind,
        records: Vec<CorpusRecord>,
    ) -> Result<Self, CorpusError> {
        let name = name.into();
        if records.is_empty() {
            return Err(CorpusError::Empty(name));
        }
        if let Some(i) = records.iter().position(|r| r.sql.trim().is_empty()) {
            return Err(CorpusError::Format {
                row: i + 1,
                message: "empty sql".to_string(),
            });
        }
        Ok(Self {
            name,
            kind,
            records,
            skipped: Vec::new(),
        })
    }

    /// Convenience for tests and small tools: one record per SQL string.
    pub fn from_sql<I, S>(name: &str, kind: CorpusKind, queries: I) -> Result<Self, CorpusError>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self::new(
            name,
            kind,
            queries.into_iter().map(CorpusRecord::new).collect(),
        )
    }

    pub fn records(&self) -> &[CorpusRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Rows dropped by the loader in skip-bad-rows mode.
    pub fn skipped(&self) -> &[SkippedRow] {
        &self.skipped
    }

    pub(crate) fn with_skipped(mut self, skipped: Vec<SkippedRow>) -> Self {
        self.skipped = skipped;
        self
    }
}
