use indexmap::IndexMap;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Corpus, CorpusError};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode", content = "value")]
pub enum SampleMode {
    /// Uniform sample of `ceil(f * n)` records, `0 < f <= 1`.
    Fraction(f64),
    /// Up to `k` records from every group.
    PerGroup(usize),
}

/// Sampling is driven by ChaCha8 seeded with `seed` via `seed_from_u64`, so a
/// given (seed, corpus order) pair always yields the same sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampleSpec {
    pub mode: SampleMode,
    pub seed: u64,
}

impl SampleSpec {
    pub fn validate(&self) -> Result<(), CorpusError> {
        match self.mode {
            SampleMode::Fraction(f) if !(f > 0.0 && f <= 1.0) => Err(CorpusError::InvalidSample(
                format!("fraction must be in (0, 1], got {f}"),
            )),
            SampleMode::PerGroup(0) => Err(CorpusError::InvalidSample(
                "per-group count must be at least 1".to_string(),
            )),
            _ => Ok(()),
        }
    }
}

/// Number of records a fraction keeps. The small epsilon stops `0.01 * 10000`
/// from rounding up to 101 through floating-point noise.
fn fraction_size(f: f64, n: usize) -> usize {
    let raw = (f * n as f64 - 1e-9).ceil();
    (raw.max(1.0) as usize).min(n)
}

/// Samples without replacement; kept records stay in their original order.
pub fn sample_corpus(corpus: &Corpus, spec: &SampleSpec) -> Result<Corpus, CorpusError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let records = corpus.records();
    let mut keep: Vec<usize> = match spec.mode {
        SampleMode::Fraction(f) => {
            let m = fraction_size(f, records.len());
            rand::seq::index::sample(&mut rng, records.len(), m).into_vec()
        }
        SampleMode::PerGroup(k) => {
            let mut groups: IndexMap<&str, Vec<usize>> = IndexMap::new();
            for (i, r) in records.iter().enumerate() {
                groups.entry(r.group_id.as_str()).or_default().push(i);
            }
            groups
                .values()
                .flat_map(|members| {
                    let m = k.min(members.len());
                    rand::seq::index::sample(&mut rng, members.len(), m)
                        .into_iter()
                        .map(|j| members[j])
                        .collect::<Vec<_>>()
                })
                .collect()
        }
    };
    keep.sort_unstable();
    let sampled = keep.into_iter().map(|i| records[i].clone()).collect();
    Corpus::new(corpus.name.clone(), corpus.kind, sampled)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{CorpusKind, CorpusRecord};

    fn corpus(groups: &[(&str, usize)]) -> Corpus {
        let mut records = Vec::new();
        for (g, n) in groups {
            for i in 0..*n {
                records.push(CorpusRecord::new(format!("SELECT {i} FROM {g}")).in_group(*g));
            }
        }
        Corpus::new("c", CorpusKind::Target, records).unwrap()
    }

    #[test]
    fn full_fraction_is_identity() {
        let c = corpus(&[("db1", 5), ("db2", 3)]);
        let spec = SampleSpec {
            mode: SampleMode::Fraction(1.0),
            seed: 9,
        };
        assert_eq!(sample_corpus(&c, &spec).unwrap().records(), c.records());
    }

    #[test]
    fn per_group_takes_min_of_k_and_size() {
        let c = corpus(&[("db1", 5), ("db2", 1)]);
        let spec = SampleSpec {
            mode: SampleMode::PerGroup(2),
            seed: 1,
        };
        let s = sample_corpus(&c, &spec).unwrap();
        assert_eq!(s.len(), 3);
        assert_eq!(
            s.records().iter().filter(|r| r.group_id == "db1").count(),
            2
        );
    }

    #[test]
    fn same_seed_same_sample() {
        let c = corpus(&[("a", 200)]);
        let spec = SampleSpec {
            mode: SampleMode::Fraction(0.1),
            seed: 42,
        };
        let a = sample_corpus(&c, &spec).unwrap();
        assert_eq!(a, sample_corpus(&c, &spec).unwrap());
        assert_eq!(a.len(), 20);
        let other = sample_corpus(&c, &SampleSpec { seed: 43, ..spec }).unwrap();
        assert_ne!(a, other);
    }

    #[test]
    fn fraction_sizes() {
        assert_eq!(fraction_size(0.01, 10_000), 100);
        assert_eq!(fraction_size(0.01, 150), 2);
        assert_eq!(fraction_size(0.001, 5), 1);
        assert_eq!(fraction_size(1.0, 7), 7);
    }

    #[test]
    fn rejects_bad_specs() {
        let c = corpus(&[("a", 3)]);
        for mode in [
            SampleMode::Fraction(0.0),
            SampleMode::Fraction(1.5),
            SampleMode::Fraction(f64::NAN),
            SampleMode::PerGroup(0),
        ] {
            assert!(sample_corpus(&c, &SampleSpec { mode, seed: 0 }).is_err());
        }
    }
}
