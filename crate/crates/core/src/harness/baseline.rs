//! Hand-crafted social-context feature baseline.

use std::collections::BTreeSet;

use ndarray::{Array1, Array2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::{Corpus, InteractionNetworks, Label};
use crate::error::{Error, Result};
use crate::weaksup::{sentiment_score, Lexicon};

pub const FEATURE_NAMES: [&str; 8] = [
    "log_engaged_users",
    "mean_log_follow_ratio",
    "verified_fraction",
    "mean_credibility",
    "log_comment_count",
    "mean_comment_sentiment",
    "comment_sentiment_variance",
    "publisher_bias_magnitude",
];

/// One row of [`FEATURE_NAMES`] per news item, using only engagements inside
/// the networks' window.
pub fn social_features(corpus: &Corpus, nets: &InteractionNetworks, lexicon: &Lexicon) -> Array2<f64> {
    let n = corpus.news().len();
    let mut feats = Array2::zeros((n, FEATURE_NAMES.len()));
    for j in 0..n {
        let users: BTreeSet<usize> = nets.spreaders_of(j).iter().copied().collect();
        let cnt = users.len() as f64;
        let mut row = feats.row_mut(j);
        row[0] = cnt.ln_1p();
        if cnt > 0.0 {
            let profiles = corpus.users();
            row[1] = users
                .iter()
                .map(|&u| ((1.0 + profiles[u].followers as f64) / (1.0 + profiles[u].followees as f64)).ln())
                .sum::<f64>()
                / cnt;
            row[2] = users.iter().filter(|&&u| profiles[u].verified).count() as f64 / cnt;
            row[3] = users.iter().map(|&u| nets.credibility[u]).sum::<f64>() / cnt;
        } else {
            row[3] = 0.5;
        }
        let publish = corpus.news()[j].publish_time;
        let scores: Vec<f64> = corpus
            .comments(j)
            .filter(|c| {
                nets.cutoff.map_or(true, |h| {
                    (c.engagement.time - publish).num_milliseconds() as f64 / 3_600_000.0 <= h
                })
            })
            .map(|c| sentiment_score(c.text(), lexicon))
            .collect();
        row[4] = (scores.len() as f64).ln_1p();
        if !scores.is_empty() {
            let mean = scores.iter().sum::<f64>() / scores.len() as f64;
            row[5] = mean;
            row[6] = scores.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / scores.len() as f64;
        }
        row[7] = nets.bias[nets.publisher_of(j)].abs();
    }
    feats
}

/// L2-regularized logistic regression trained by full-batch gradient descent
/// on standardized features.
#[derive(Debug, Clone, PartialEq)]
pub struct LogisticRegression {
    mean: Array1<f64>,
    scale: Array1<f64>,
    weights: Array1<f64>,
    intercept: f64,
}

const LR_EPOCHS: usize = 500;
const LR_RATE: f64 = 0.5;
const LR_L2: f64 = 1e-3;

impl LogisticRegression {
    pub fn fit(x: &Array2<f64>, y: &[Label], seed: u64) -> Result<Self> {
        if x.nrows() != y.len() || y.is_empty() {
            return Err(Error::ShapeMismatch("features and labels disagree".into()));
        }
        if y.iter().all(|l| *l == y[0]) {
            return Err(Error::SingleClass);
        }
        let mean = x.mean_axis(Axis(0)).unwrap();
        let scale = x.std_axis(Axis(0), 0.0).mapv(|s| if s > 1e-12 { s } else { 1.0 });
        let z = (x - &mean) / &scale;
        let target = Array1::from_iter(y.iter().map(|l| l.as_f64()));
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut weights = Array1::from_shape_simple_fn(x.ncols(), || (rng.random::<f64>() - 0.5) * 0.01);
        let mut intercept = 0.0;
        let n = y.len() as f64;
        for _ in 0..LR_EPOCHS {
            let p = (z.dot(&weights) + intercept).mapv(sigmoid);
            let err = &p - &target;
            let grad = z.t().dot(&err) / n + &weights * LR_L2;
            weights.scaled_add(-LR_RATE, &grad);
            intercept -= LR_RATE * err.sum() / n;
        }
        Ok(LogisticRegression {
            mean,
            scale,
            weights,
            intercept,
        })
    }

    pub fn predict_proba(&self, x: &Array2<f64>) -> Array1<f64> {
        let z = (x - &self.mean) / &self.scale;
        (z.dot(&self.weights) + self.intercept).mapv(sigmoid)
    }

    pub fn weights(&self) -> &Array1<f64> {
        &self.weights
    }
}

fn sigmoid(v: f64) -> f64 {
    1.0 / (1.0 + (-v).exp())
}

/// Train on `train` rows, return `p_fake` for every news item.
pub fn feature_baseline(
    corpus: &Corpus,
    nets: &InteractionNetworks,
    lexicon: &Lexicon,
    gold: &[Option<Label>],
    seed: u64,
) -> Result<Vec<f64>> {
    let feats = social_features(corpus, nets, lexicon);
    let rows: Vec<usize> = (0..gold.len()).filter(|&j| gold[j].is_some()).collect();
    let labels: Vec<Label> = rows.iter().map(|&j| gold[j].unwrap()).collect();
    let model = LogisticRegression::fit(&feats.select(Axis(0), &rows), &labels, seed)?;
    Ok(model.predict_proba(&feats).to_vec())
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn single_class_rejected() {
        let x = array![[1.0], [2.0]];
        assert!(matches!(
            LogisticRegression::fit(&x, &[Label::Fake, Label::Fake], 0),
            Err(Error::SingleClass)
        ));
    }

    #[test]
    fn constant_features_are_ignored() {
        // only the last column varies
        let x = array![[1.0, 0.1], [1.0, 0.9], [1.0, 0.2], [1.0, 0.8]];
        let y = [Label::Real, Label::Fake, Label::Real, Label::Fake];
        let m = LogisticRegression::fit(&x, &y, 3).unwrap();
        let p = m.predict_proba(&x);
        assert!(p[1] > 0.5 && p[3] > 0.5 && p[0] < 0.5 && p[2] < 0.5);
        assert!(m.weights()[1] > 10.0 * m.weights()[0].abs());
    }
}
