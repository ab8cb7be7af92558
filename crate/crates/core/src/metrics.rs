//! KL divergence between n-gram distributions, the KL-alignment transform,
//! the alignment ratio and the template-overlap (OVLP) ratio.
//!
//! Divergences are in nats. Zero counts are handled with additive smoothing
//! over the union of the two vocabularies being compared:
//! `P'(i) = (count_p(i) + alpha) / (total_p + alpha * |V|)`.

use std::cmp::Ordering;
use std::collections::{btree_map, BTreeSet};
use std::iter::Peekable;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ngram::NGramDistribution;

pub const DEFAULT_ALPHA: f64 = 0.5;

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("empty distribution")]
    EmptyDistribution,
    #[error("smoothing constant must be positive and finite, got {0}")]
    InvalidAlpha(f64),
    #[error("scaling constant c must be positive and finite, got {0}")]
    InvalidScale(f64),
    #[error("no candidate distributions to align")]
    NoCandidates,
    #[error("target template set is empty")]
    EmptyTargetSet,
}

/// How the scaling constant `c` of the alignment transform is chosen.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode", content = "c")]
pub enum ScaleMode {
    #[default]
    /// `c` is the largest divergence among the candidates, so the farthest
    /// candidate scores exactly `1/e`.
    MaxInBatch,
    Fixed(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlignmentScore {
    pub d_kl: f64,
    pub a_kl: f64,
    pub c: f64,
    pub alpha: f64,
}

impl AlignmentScore {
    pub fn new(d_kl: f64, c: f64, alpha: f64) -> Result<Self, MetricsError> {
        check_scale(c)?;
        Ok(Self {
            d_kl,
            a_kl: kl_alignment(d_kl, c),
            c,
            alpha,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlignmentRatio {
    pub ar: f64,
    /// Score of the target against the training set.
    pub numerator: AlignmentScore,
    /// Score of the target against the baseline predictions.
    pub denominator: AlignmentScore,
}

impl AlignmentRatio {
    /// `AR > 1`: the training set is closer to the target than the base
    /// model's own outputs. A heuristic, not a guarantee.
    pub fn sft_recommended(&self) -> bool {
        self.ar > 1.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatchAlignment {
    pub c: f64,
    pub scores: Vec<AlignmentScore>,
    pub warnings: Vec<String>,
}

fn check_alpha(alpha: f64) -> Result<(), MetricsError> {
    if alpha > 0.0 && alpha.is_finite() {
        Ok(())
    } else {
        Err(MetricsError::InvalidAlpha(alpha))
    }
}

fn check_scale(c: f64) -> Result<(), MetricsError> {
    if c > 0.0 && c.is_finite() {
        Ok(())
    } else {
        Err(MetricsError::InvalidScale(c))
    }
}

/// Pairs up the counts of two sorted maps over their union of keys.
struct UnionCounts<'a> {
    p: Peekable<btree_map::Iter<'a, String, u64>>,
    q: Peekable<btree_map::Iter<'a, String, u64>>,
}

impl Iterator for UnionCounts<'_> {
    type Item = (u64, u64);

    fn next(&mut self) -> Option<(u64, u64)> {
        let order = match (self.p.peek(), self.q.peek()) {
            (None, None) => return None,
            (Some(_), None) => Ordering::Less,
            (None, Some(_)) => Ordering::Greater,
            (Some((kp, _)), Some((kq, _))) => kp.cmp(kq),
        };
        Some(match order {
            Ordering::Less => (*self.p.next()?.1, 0),
            Ordering::Greater => (0, *self.q.next()?.1),
            Ordering::Equal => (*self.p.next()?.1, *self.q.next()?.1),
        })
    }
}

fn union_counts<'a>(p: &'a NGramDistribution, q: &'a NGramDistribution) -> UnionCounts<'a> {
    UnionCounts {
        p: p.counts().iter().peekable(),
        q: q.counts().iter().peekable(),
    }
}

/// `D_KL(P || Q)` with additive smoothing over the union vocabulary.
pub fn kl_divergence(
    p: &NGramDistribution,
    q: &NGramDistribution,
    alpha: f64,
) -> Result<f64, MetricsError> {
    check_alpha(alpha)?;
    if p.total() == 0 || q.total() == 0 {
        return Err(MetricsError::EmptyDistribution);
    }
    let vocab = union_counts(p, q).count() as f64;
    let p_norm = p.total() as f64 + alpha * vocab;
    let q_norm = q.total() as f64 + alpha * vocab;
    let sum: f64 = union_counts(p, q)
        .map(|(cp, cq)| {
            let pi = (cp as f64 + alpha) / p_norm;
            let qi = (cq as f64 + alpha) / q_norm;
            pi * (pi / qi).ln()
        })
        .sum();
    // Gibbs: the true value is nonnegative; only rounding can push it below.
    Ok(sum.max(0.0))
}

/// `exp(-d_kl / c)`; 1 means identical distributions. `c` must be positive.
pub fn kl_alignment(d_kl: f64, c: f64) -> f64 {
    assert!(c > 0.0, "scaling constant must be positive");
    (-d_kl / c).exp()
}

/// Scores every candidate against the target.
pub fn batch_align(
    target: &NGramDistribution,
    candidates: &[&NGramDistribution],
    alpha: f64,
    mode: ScaleMode,
) -> Result<BatchAlignment, MetricsError> {
    if candidates.is_empty() {
        return Err(MetricsError::NoCandidates);
    }
    check_alpha(alpha)?;
    if let ScaleMode::Fixed(c) = mode {
        check_scale(c)?;
    }
    let divergences = candidates
        .par_iter()
        .map(|cand| kl_divergence(target, cand, alpha))
        .collect::<Result<Vec<_>, _>>()?;

    let mut warnings = Vec::new();
    let c = match mode {
        ScaleMode::Fixed(c) => c,
        ScaleMode::MaxInBatch => {
            if candidates.len() < 2 {
                let msg = "max_in_batch scaling with a single candidate: its score is 1/e by \
                           construction (or 1.0 if identical); use a fixed c to compare runs";
                log::warn!("{msg}");
                warnings.push(msg.to_string());
            }
            let max = divergences.iter().copied().fold(0.0, f64::max);
            if max > 0.0 {
                max
            } else {
                // every candidate matches the target; any c gives 1.0
                1.0
            }
        }
    };
    let scores = divergences
        .into_iter()
        .map(|d| AlignmentScore::new(d, c, alpha))
        .collect::<Result<_, _>>()?;
    Ok(BatchAlignment {
        c,
        scores,
        warnings,
    })
}

/// `A_KL(target || train) / A_KL(target || pred)` under one shared `c`.
pub fn alignment_ratio(
    target: &NGramDistribution,
    train: &NGramDistribution,
    pred: &NGramDistribution,
    alpha: f64,
    c: f64,
) -> Result<AlignmentRatio, MetricsError> {
    check_scale(c)?;
    let d_train = kl_divergence(target, train, alpha)?;
    let d_pred = kl_divergence(target, pred, alpha)?;
    Ok(AlignmentRatio {
        // the exponent of the difference keeps AR > 1 exactly when d_train < d_pred
        ar: (-(d_train - d_pred) / c).exp(),
        numerator: AlignmentScore::new(d_train, c, alpha)?,
        denominator: AlignmentScore::new(d_pred, c, alpha)?,
    })
}

/// Fraction of distinct target templates that also occur in the source.
pub fn ovlp_ratio(
    target_templates: &BTreeSet<String>,
    source_templates: &BTreeSet<String>,
) -> Result<f64, MetricsError> {
    if target_templates.is_empty() {
        return Err(MetricsError::EmptyTargetSet);
    }
    let shared = target_templates.intersection(source_templates).count();
    Ok(shared as f64 / target_templates.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::{E, LN_2};

    fn dist(pairs: &[(&str, u64)]) -> NGramDistribution {
        NGramDistribution::from_counts(pairs.iter().map(|(k, v)| (k.to_string(), *v)), 15, "")
            .unwrap()
    }

    fn set(items: &[&str]) -> BTreeSet<String> {
        items.iter().map(|s| s.to_string()).collect()
    }

    /// Direct evaluation of sum P(i) ln(P(i)/Q(i)) on unsmoothed probabilities.
    fn unsmoothed(p: &[f64], q: &[f64]) -> f64 {
        let sp: f64 = p.iter().sum();
        let sq: f64 = q.iter().sum();
        p.iter()
            .zip(q)
            .map(|(a, b)| (a / sp) * ((a / sp) / (b / sq)).ln())
            .sum()
    }

    #[test]
    fn identity_is_zero() {
        let p = dist(&[("SELECT", 3), ("FROM", 5), ("SELECT FROM", 1)]);
        assert!(kl_divergence(&p, &p, DEFAULT_ALPHA).unwrap().abs() <= 1e-12);
    }

    #[test]
    fn hand_computed_pair() {
        let oracle = unsmoothed(&[1.0, 1.0], &[1.0, 3.0]);
        assert!((oracle - 0.14384).abs() < 1e-5);
        let p = dist(&[("a", 1), ("b", 1)]);
        let q = dist(&[("a", 1), ("b", 3)]);
        let d = kl_divergence(&p, &q, 1e-6).unwrap();
        assert!((d - 0.14384).abs() < 1e-3, "{d}");
        assert!((d - oracle).abs() < 1e-5);
    }

    #[test]
    fn asymmetric() {
        let p = dist(&[("a", 1), ("b", 1)]);
        let q = dist(&[("a", 1), ("b", 3)]);
        let forward = kl_divergence(&p, &q, 1e-6).unwrap();
        let backward = kl_divergence(&q, &p, 1e-6).unwrap();
        assert!((forward - backward).abs() > 1e-3);
    }

    #[test]
    fn smoothing_keeps_support_mismatch_finite() {
        let p = dist(&[("a", 2), ("b", 1)]);
        let q = dist(&[("a", 4)]);
        let d = kl_divergence(&p, &q, 0.5).unwrap();
        assert!(d.is_finite() && d > 0.0);
        assert_eq!(
            kl_divergence(&p, &q, 0.0),
            Err(MetricsError::InvalidAlpha(0.0))
        );
    }

    #[test]
    fn alignment_transform() {
        assert_eq!(kl_alignment(0.0, 3.0), 1.0);
        assert!((kl_alignment(2.5, 2.5) - 1.0 / E).abs() < 1e-12);
        assert!((kl_alignment(0.7 * LN_2, 0.7) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn batch_max_mode() {
        let target = dist(&[("a", 10), ("b", 10)]);
        let near = dist(&[("a", 10), ("b", 12)]);
        let far = dist(&[("a", 10), ("b", 90)]);
        let same = target.clone();
        let batch = batch_align(
            &target,
            &[&near, &far, &same],
            DEFAULT_ALPHA,
            ScaleMode::MaxInBatch,
        )
        .unwrap();
        let d_far = kl_divergence(&target, &far, DEFAULT_ALPHA).unwrap();
        assert_eq!(batch.c, d_far);
        assert!((batch.scores[1].a_kl - 1.0 / E).abs() < 1e-12);
        assert_eq!(batch.scores[2].a_kl, 1.0);
        assert!(batch.scores[0].a_kl > 1.0 / E && batch.scores[0].a_kl < 1.0);
        assert!(batch.warnings.is_empty());
    }

    #[test]
    fn batch_single_identical_candidate() {
        let target = dist(&[("a", 1)]);
        for mode in [ScaleMode::MaxInBatch, ScaleMode::Fixed(0.3)] {
            let batch = batch_align(&target, &[&target], DEFAULT_ALPHA, mode).unwrap();
            assert_eq!(batch.scores[0].a_kl, 1.0);
        }
        let batch = batch_align(&target, &[&target], DEFAULT_ALPHA, ScaleMode::MaxInBatch).unwrap();
        assert_eq!(batch.warnings.len(), 1);
    }

    #[test]
    fn batch_fixed_mode() {
        let s = AlignmentScore::new(1.0, 1.0, DEFAULT_ALPHA).unwrap();
        assert!((s.a_kl - 1.0 / E).abs() < 1e-12);
        let target = dist(&[("a", 1)]);
        assert_eq!(
            batch_align(&target, &[], DEFAULT_ALPHA, ScaleMode::MaxInBatch),
            Err(MetricsError::NoCandidates)
        );
        assert_eq!(
            batch_align(&target, &[&target], DEFAULT_ALPHA, ScaleMode::Fixed(0.0)),
            Err(MetricsError::InvalidScale(0.0))
        );
    }

    #[test]
    fn ratio_examples() {
        let target = dist(&[("a", 5), ("b", 1)]);
        let train = dist(&[("a", 1), ("b", 5)]);
        let r = alignment_ratio(&target, &train, &train, DEFAULT_ALPHA, 1.0).unwrap();
        assert_eq!(r.ar, 1.0);
        assert!(!r.sft_recommended());

        let r = alignment_ratio(&target, &target, &train, DEFAULT_ALPHA, 2.0).unwrap();
        assert_eq!(r.numerator.a_kl, 1.0);
        assert!((r.ar - 1.0 / r.denominator.a_kl).abs() < 1e-12);
        assert!(r.sft_recommended());
    }

    #[test]
    fn ratio_from_divergences() {
        // d_train = 0.2, d_pred = 0.7, c = 1 gives exp(0.5)
        let num = AlignmentScore::new(0.2, 1.0, DEFAULT_ALPHA).unwrap();
        let den = AlignmentScore::new(0.7, 1.0, DEFAULT_ALPHA).unwrap();
        assert!((num.a_kl / den.a_kl - 1.6487212707).abs() < 1e-9);
    }

    #[test]
    fn ovlp_examples() {
        let abc = set(&["A", "B", "C"]);
        assert_eq!(ovlp_ratio(&abc, &abc).unwrap(), 1.0);
        assert_eq!(ovlp_ratio(&abc, &set(&["A", "C", "D"])).unwrap(), 2.0 / 3.0);
        assert_eq!(ovlp_ratio(&abc, &set(&["X"])).unwrap(), 0.0);
        assert_eq!(
            ovlp_ratio(&BTreeSet::new(), &abc),
            Err(MetricsError::EmptyTargetSet)
        );
    }

    fn arb_dist() -> impl Strategy<Value = NGramDistribution> {
        prop::collection::btree_map(0u8..50, 1u64..=100, 1..50).prop_map(|m| {
            NGramDistribution::from_counts(m.into_iter().map(|(k, v)| (format!("k{k}"), v)), 15, "")
                .unwrap()
        })
    }

    proptest! {
        #[test]
        fn gibbs(p in arb_dist(), q in arb_dist(), alpha in 1e-6f64..2.0) {
            let d = kl_divergence(&p, &q, alpha).unwrap();
            prop_assert!(d >= -1e-12);
            prop_assert!(kl_divergence(&p, &p, alpha).unwrap() <= 1e-12);
        }

        #[test]
        fn alignment_monotone(d1 in 0.0f64..10.0, gap in 1e-3f64..5.0, c in 0.1f64..10.0) {
            prop_assert!(kl_alignment(d1, c) > kl_alignment(d1 + gap, c));
            prop_assert!(kl_alignment(d1 + gap, c) < kl_alignment(d1 + gap, c + 0.5));
        }

        #[test]
        fn ar_sign(t in arb_dist(), tr in arb_dist(), pr in arb_dist(), c in 0.01f64..10.0) {
            let r = alignment_ratio(&t, &tr, &pr, DEFAULT_ALPHA, c).unwrap();
            prop_assert_eq!(r.ar > 1.0, r.numerator.d_kl < r.denominator.d_kl);
            prop_assert_eq!(r.numerator.c, r.denominator.c);
        }

        #[test]
        fn ovlp_monotone(target in prop::collection::btree_set("[A-E]", 1..5),
                         source in prop::collection::btree_set("[A-H]", 0..6),
                         extra in "[A-H]") {
            let before = ovlp_ratio(&target, &source).unwrap();
            let mut grown = source.clone();
            grown.insert(extra);
            prop_assert!(ovlp_ratio(&target, &grown).unwrap() >= before);
        }
    }
}
