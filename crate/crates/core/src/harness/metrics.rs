//! Classification and ranking metrics. Fake is the positive class.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::corpus::Label;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassificationMetrics {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

impl ClassificationMetrics {
    pub fn from_counts(tp: usize, fp: usize, tn: usize, fn_: usize) -> Self {
        let precision = ratio(tp, tp + fp);
        let recall = ratio(tp, tp + fn_);
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        ClassificationMetrics {
            accuracy: ratio(tp + tn, tp + fp + tn + fn_),
            precision,
            recall,
            f1,
            tp,
            fp,
            tn,
            fn_,
        }
    }
}

pub fn evaluate_classification(predictions: &[Label], gold: &[Label]) -> Result<ClassificationMetrics> {
    if gold.is_empty() {
        return Err(Error::EmptyGold);
    }
    if predictions.len() != gold.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} predictions for {} gold labels",
            predictions.len(),
            gold.len()
        )));
    }
    let (mut tp, mut fp, mut tn, mut fn_) = (0, 0, 0, 0);
    for (p, g) in predictions.iter().zip(gold) {
        match (p.is_fake(), g.is_fake()) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, false) => tn += 1,
            (false, true) => fn_ += 1,
        }
    }
    Ok(ClassificationMetrics::from_counts(tp, fp, tn, fn_))
}

/// Average precision of one ranking (item indices, best first). `None` when
/// nothing is relevant.
pub fn average_precision(ranking: &[usize], relevant: &HashSet<usize>) -> Option<f64> {
    if relevant.is_empty() {
        return None;
    }
    let mut hits = 0usize;
    let mut sum = 0.0;
    for (r, item) in ranking.iter().enumerate() {
        if relevant.contains(item) {
            hits += 1;
            sum += hits as f64 / (r + 1) as f64;
        }
    }
    Some(sum / relevant.len() as f64)
}

/// Mean average precision over items with at least one relevant entry.
pub fn map_score(rankings: &[Vec<usize>], relevant: &[HashSet<usize>]) -> f64 {
    assert_eq!(rankings.len(), relevant.len());
    let aps: Vec<f64> = rankings
        .iter()
        .zip(relevant)
        .filter_map(|(r, rel)| average_precision(r, rel))
        .collect();
    let skipped = rankings.len() - aps.len();
    if skipped > 0 {
        log::warn!("{skipped} rankings without relevant items excluded from MAP");
    }
    if aps.is_empty() {
        0.0
    } else {
        aps.iter().sum::<f64>() / aps.len() as f64
    }
}

/// NDCG@k of `ranking` where `gains[i]` is the gain of item `i`.
pub fn ndcg_at_k(ranking: &[usize], gains: &[f64], k: usize) -> f64 {
    let discount = |r: usize| 1.0 / ((r + 2) as f64).log2();
    let dcg: f64 = ranking
        .iter()
        .take(k)
        .enumerate()
        .map(|(r, &i)| gains[i] * discount(r))
        .sum();
    let mut ideal = gains.to_vec();
    ideal.sort_by(|a, b| b.total_cmp(a));
    let idcg: f64 = ideal
        .iter()
        .take(k)
        .enumerate()
        .map(|(r, g)| g * discount(r))
        .sum();
    if idcg == 0.0 {
        0.0
    } else {
        dcg / idcg
    }
}

/// Expected [`average_precision`] of a uniformly random ranking of `n` items
/// of which `relevant` are relevant.
pub fn random_average_precision(n: usize, relevant: usize) -> f64 {
    if relevant == 0 || n == 0 {
        return 0.0;
    }
    if n == 1 {
        return 1.0;
    }
    let harmonic: f64 = (1..=n).map(|r| 1.0 / r as f64).sum();
    let others = (relevant - 1) as f64 / (n - 1) as f64;
    (harmonic + others * (n as f64 - harmonic)) / n as f64
}

/// Expected [`ndcg_at_k`] of a uniformly random ranking of all items.
pub fn random_ndcg_at_k(gains: &[f64], k: usize) -> f64 {
    let n = gains.len();
    if n == 0 {
        return 0.0;
    }
    let discount = |r: usize| 1.0 / ((r + 2) as f64).log2();
    let mean_gain = gains.iter().sum::<f64>() / n as f64;
    let expected_dcg: f64 = (0..k.min(n)).map(|r| mean_gain * discount(r)).sum();
    let mut sorted = gains.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let idcg: f64 = sorted.iter().take(k).enumerate().map(|(r, g)| g * discount(r)).sum();
    if idcg == 0.0 {
        0.0
    } else {
        expected_dcg / idcg
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn classification_examples() {
        let all = [Label::Fake, Label::Real, Label::Fake];
        let m = evaluate_classification(&all, &all).unwrap();
        assert_eq!((m.accuracy, m.precision, m.recall, m.f1), (1.0, 1.0, 1.0, 1.0));

        let gold = [Label::Fake, Label::Fake, Label::Real, Label::Real];
        let m = evaluate_classification(&[Label::Real; 4], &gold).unwrap();
        assert_eq!((m.accuracy, m.recall, m.f1), (0.5, 0.0, 0.0));

        let m = ClassificationMetrics::from_counts(8, 2, 8, 2);
        for v in [m.precision, m.recall, m.f1, m.accuracy] {
            assert!((v - 0.8).abs() < 1e-15);
        }
        assert!(matches!(evaluate_classification(&[], &[]), Err(Error::EmptyGold)));
    }

    #[test]
    fn map_examples() {
        let rel: HashSet<usize> = [0].into();
        assert_eq!(average_precision(&[0, 1, 2], &rel), Some(1.0));
        assert_eq!(average_precision(&[1, 0, 2, 3], &rel), Some(0.5));
        let rel: HashSet<usize> = [5, 7].into();
        let ap = average_precision(&[5, 1, 7, 2], &rel).unwrap();
        assert!((ap - 5.0 / 6.0).abs() < 1e-15);
        assert_eq!(map_score(&[vec![0, 1]], &[HashSet::new()]), 0.0);
    }

    #[test]
    fn ndcg_examples() {
        assert_eq!(ndcg_at_k(&[0, 1, 2], &[3.0, 2.0, 1.0], 3), 1.0);
        assert_eq!(ndcg_at_k(&[0, 1], &[0.0, 0.0], 2), 0.0);
        let v = ndcg_at_k(&[0, 1, 2], &[1.0, 0.0, 1.0], 3);
        let expected = (1.0 + 0.5) / (1.0 + 1.0 / 3f64.log2());
        assert!((v - expected).abs() < 1e-15);
    }

    fn permutations(n: usize) -> Vec<Vec<usize>> {
        if n == 0 {
            return vec![vec![]];
        }
        let mut out = Vec::new();
        for p in permutations(n - 1) {
            for i in 0..=p.len() {
                let mut q = p.clone();
                q.insert(i, n - 1);
                out.push(q);
            }
        }
        out
    }

    #[test]
    fn random_baselines_match_enumeration() {
        for n in 1..=6 {
            let perms = permutations(n);
            for r in 1..=n {
                let rel: HashSet<usize> = (0..r).collect();
                let brute = perms.iter().map(|p| average_precision(p, &rel).unwrap()).sum::<f64>()
                    / perms.len() as f64;
                assert!((random_average_precision(n, r) - brute).abs() < 1e-12, "n {n} r {r}");
            }
            let gains: Vec<f64> = (0..n).map(|i| (i % 3) as f64).collect();
            for k in 1..=n + 1 {
                let brute = perms.iter().map(|p| ndcg_at_k(p, &gains, k)).sum::<f64>() / perms.len() as f64;
                assert!((random_ndcg_at_k(&gains, k) - brute).abs() < 1e-12, "n {n} k {k}");
            }
        }
    }
}
