use std::collections::BTreeSet;

use rayon::prelude::*;
use serde::Serialize;

use super::{Corpus, CorpusError};
use crate::keywords::KeywordSet;
use crate::ngram::{build_distribution_with, NGramDistribution, NGramError};
use crate::template::{templatize, StructuralTemplate};

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ParseFailure {
    /// 0-based record index.
    pub index: usize,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ParseReport {
    pub parsed: usize,
    pub failed: usize,
    pub failures: Vec<ParseFailure>,
}

#[derive(Debug, Clone)]
pub struct Templatized {
    /// Templates of the records that parsed, in record order.
    pub templates: Vec<StructuralTemplate>,
    pub distribution: NGramDistribution,
    pub report: ParseReport,
}

impl Templatized {
    /// Distinct canonical templates, the unit of OVLP comparison.
    pub fn template_set(&self) -> BTreeSet<String> {
        self.templates
            .iter()
            .map(StructuralTemplate::canonical_text)
            .collect()
    }
}

/// Parses every record, tolerating failures, and builds the n-gram
/// distribution of the ones that parsed.
pub fn templatize_corpus(corpus: &Corpus, l_max: usize) -> Result<Templatized, CorpusError> {
    let results: Vec<_> = corpus
        .records()
        .par_iter()
        .map(|r| templatize(&r.sql))
        .collect();

    let mut templates = Vec::with_capacity(results.len());
    let mut report = ParseReport::default();
    for (index, result) in results.into_iter().enumerate() {
        match result {
            Ok(t) => {
                templates.push(t);
                report.parsed += 1;
            }
            Err(e) => {
                report.failed += 1;
                report.failures.push(ParseFailure {
                    index,
                    message: e.to_string(),
                });
            }
        }
    }
    if templates.is_empty() {
        return Err(CorpusError::EmptyDistribution(corpus.name.clone()));
    }
    let distribution =
        build_distribution_with(&templates, l_max, &KeywordSet::default(), &corpus.name).map_err(
            |e| match e {
                NGramError::EmptyDistribution => {
                    CorpusError::EmptyDistribution(corpus.name.clone())
                }
                other => other.into(),
            },
        )?;
    Ok(Templatized {
        templates,
        distribution,
        report,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::CorpusKind;

    const GOLDEN: &str = "SELECT meal/enrollment FROM frpm WHERE county='Alameda' \
        ORDER BY (CAST(meal AS REAL) / enrollment) DESC LIMIT 1";

    #[test]
    fn counts_parsed_and_failed() {
        let c = Corpus::from_sql(
            "c",
            CorpusKind::Train,
            ["SELECT a FROM t", "SELECT b FROM u"],
        )
        .unwrap();
        let t = templatize_corpus(&c, 15).unwrap();
        assert_eq!((t.report.parsed, t.report.failed), (2, 0));

        let c = Corpus::from_sql(
            "c",
            CorpusKind::Train,
            ["SELECT a FROM t", "SELECT FROM WHERE"],
        )
        .unwrap();
        let t = templatize_corpus(&c, 15).unwrap();
        assert_eq!((t.report.parsed, t.report.failed), (1, 1));
        assert_eq!(t.report.failures[0].index, 1);
        let only_valid = Corpus::from_sql("c", CorpusKind::Train, ["SELECT a FROM t"]).unwrap();
        assert_eq!(
            t.distribution.counts(),
            templatize_corpus(&only_valid, 15)
                .unwrap()
                .distribution
                .counts()
        );
    }

    #[test]
    fn all_failures_is_empty_distribution() {
        let c =
            Corpus::from_sql("bad", CorpusKind::Prediction, ["SELECT", "nonsense here"]).unwrap();
        assert!(matches!(
            templatize_corpus(&c, 15),
            Err(CorpusError::EmptyDistribution(name)) if name == "bad"
        ));
    }

    #[test]
    fn golden_query_distribution_is_filtered_window_set() {
        let c = Corpus::from_sql("g", CorpusKind::Target, [GOLDEN]).unwrap();
        let t = templatize_corpus(&c, 15).unwrap();
        let toks = t.templates[0].tokens().to_vec();
        assert_eq!(toks.len(), 15);
        // 120 candidate windows; count the survivors by hand-rolled filtering
        let kw = KeywordSet::default();
        let mut survivors = 0u64;
        let mut candidates = 0;
        for i in 0..toks.len() {
            for j in i + 1..=toks.len() {
                candidates += 1;
                let w = &toks[i..j];
                let parens = w.iter().filter(|x| *x == "(").count() as i64
                    - w.iter().filter(|x| *x == ")").count() as i64;
                if w.iter().any(|x| kw.contains(x))
                    && w[0] != ","
                    && w[w.len() - 1] != ","
                    && parens == 0
                {
                    survivors += 1;
                }
            }
        }
        assert_eq!(candidates, 120);
        assert_eq!(t.distribution.total(), survivors);
        assert!(survivors < 120);
    }

    #[test]
    fn record_order_does_not_change_counts() {
        let qs = [
            "SELECT a FROM t",
            "SELECT COUNT(*) FROM t WHERE x > 1",
            "SELECT a, b FROM t",
        ];
        let mut rev = qs;
        rev.reverse();
        let a =
            templatize_corpus(&Corpus::from_sql("c", CorpusKind::Train, qs).unwrap(), 15).unwrap();
        let b =
            templatize_corpus(&Corpus::from_sql("c", CorpusKind::Train, rev).unwrap(), 15).unwrap();
        assert_eq!(a.distribution, b.distribution);
    }
}
