//! Metrics, baselines and experiment drivers.

pub mod ablation;
pub mod baseline;
pub mod explain;
pub mod metrics;
pub mod report;

use std::fmt;
use std::str::FromStr;

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{build_networks, Corpus, InteractionNetworks, Label};
use crate::error::{Error, Result};
use crate::trifn::{self, Supervision, TriFnHyper};
use crate::weaksup::{
    aggregate_all, apply_rules, credibility_scores, estimate_rule_weights, LabelDistribution, Lexicon,
    RuleWeights, WeakSupParams, WeakVote, RULES,
};

pub use ablation::{ablation_study, mean_f1, AblationRow};
pub use baseline::{feature_baseline, social_features, LogisticRegression, FEATURE_NAMES};
pub use explain::{explanation_scores, ExplanationScores};
pub use metrics::{
    average_precision, evaluate_classification, map_score, ndcg_at_k, random_average_precision, random_ndcg_at_k,
    ClassificationMetrics,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Trifn,
    TrifnNoWss,
    FeatureBaseline,
    WeakOnly,
}

impl Method {
    pub const ALL: [Method; 4] = [
        Method::Trifn,
        Method::TrifnNoWss,
        Method::FeatureBaseline,
        Method::WeakOnly,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Trifn => "trifn",
            Method::TrifnNoWss => "trifn_no_wss",
            Method::FeatureBaseline => "feature_baseline",
            Method::WeakOnly => "weak_only",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::UnknownMethod(s.to_string()))
    }
}

/// Stratified `k`-fold split of the gold-labeled news. Each class is shuffled
/// with `seed` and dealt round-robin, so fold sizes per class differ by at
/// most one. Returns news indices per fold, each sorted.
pub fn stratified_folds(gold: &[Option<Label>], k: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if k < 2 {
        return Err(Error::InvalidArgument(format!("need at least 2 folds, got {k}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut folds = vec![Vec::new(); k];
    let mut next = 0;
    for class in [Label::Real, Label::Fake] {
        let mut members: Vec<usize> = (0..gold.len()).filter(|&j| gold[j] == Some(class)).collect();
        members.shuffle(&mut rng);
        for j in members {
            folds[next % k].push(j);
            next += 1;
        }
    }
    if folds.iter().any(|f| f.is_empty()) {
        return Err(Error::InvalidArgument(format!(
            "{} gold labels cannot fill {k} folds",
            gold.iter().flatten().count()
        )));
    }
    for f in &mut folds {
        f.sort_unstable();
    }
    Ok(folds)
}

/// Gold labels restricted to `train`; everything else unlabeled.
pub fn mask_gold(gold: &[Option<Label>], train: &[usize]) -> Vec<Option<Label>> {
    let mut masked = vec![None; gold.len()];
    for &j in train {
        masked[j] = gold[j];
    }
    masked
}

/// Everything a learner sees for one training split at one cutoff: networks
/// whose credibility is inferred from the training labels only, the weak
/// votes, rule weights estimated on the training labels, and the aggregated
/// label distributions.
#[derive(Debug, Clone)]
pub struct WeakView {
    pub networks: InteractionNetworks,
    pub votes: Vec<WeakVote>,
    pub weights: RuleWeights,
    pub distributions: Vec<LabelDistribution>,
}

pub fn weak_view(
    corpus: &Corpus,
    content: &Array2<f64>,
    train_gold: &[Option<Label>],
    cutoff_hours: Option<f64>,
    lexicon: &Lexicon,
    params: &WeakSupParams,
) -> Result<WeakView> {
    let credibility = credibility_scores(corpus, train_gold, cutoff_hours);
    let networks = build_networks(corpus, content.clone(), cutoff_hours, &credibility)?;
    let votes = apply_rules(corpus, &networks, lexicon, params);
    let weights = estimate_rule_weights(
        &votes,
        |id| corpus.news_position(id).and_then(|j| train_gold[j]),
        RULES,
    );
    let distributions = aggregate_all(corpus, &votes, &weights);
    Ok(WeakView {
        networks,
        votes,
        weights,
        distributions,
    })
}

/// Settings shared by every cell of an experiment.
#[derive(Debug, Clone)]
pub struct CellContext<'a> {
    pub corpus: &'a Corpus,
    pub content: &'a Array2<f64>,
    pub lexicon: &'a Lexicon,
    pub weaksup: WeakSupParams,
    pub trifn: TriFnHyper,
}

/// `p_fake` for every news item from `method` trained on `train`.
pub fn predict_split(
    ctx: &CellContext<'_>,
    method: Method,
    train: &[usize],
    cutoff_hours: Option<f64>,
    seed: u64,
) -> Result<Vec<f64>> {
    let gold = mask_gold(&ctx.corpus.gold_labels(), train);
    let view = weak_view(ctx.corpus, ctx.content, &gold, cutoff_hours, ctx.lexicon, &ctx.weaksup)?;
    match method {
        Method::Trifn | Method::TrifnNoWss => {
            let mut hyper = TriFnHyper { seed, ..ctx.trifn };
            if method == Method::TrifnNoWss {
                hyper.beta = 0.0;
                hyper.gamma = 0.0;
            }
            let weak: Vec<Option<f64>> = view.distributions.iter().map(|d| Some(d.p_fake)).collect();
            let out = trifn::fit(&view.networks, Supervision { gold: &gold, weak: &weak }, hyper)?;
            (0..ctx.corpus.news().len()).map(|j| out.model.predict(j)).collect()
        }
        Method::FeatureBaseline => feature_baseline(ctx.corpus, &view.networks, ctx.lexicon, &gold, seed),
        Method::WeakOnly => Ok(view.distributions.iter().map(|d| d.p_fake).collect()),
    }
}

/// Threshold at 0.5 with ties classified real.
pub fn decide(p_fake: f64) -> Label {
    if p_fake > 0.5 {
        Label::Fake
    } else {
        Label::Real
    }
}

/// One evaluated (method, cutoff, seed, fold) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub method: Method,
    pub cutoff: Option<f64>,
    pub seed: u64,
    pub fold: usize,
    pub metrics: ClassificationMetrics,
}

/// Cross-validated metrics of `method` for one cutoff and one seed.
pub fn cross_validate(
    ctx: &CellContext<'_>,
    method: Method,
    cutoff_hours: Option<f64>,
    seed: u64,
    n_folds: usize,
) -> Result<Vec<MetricsRow>> {
    let gold = ctx.corpus.gold_labels();
    let folds = stratified_folds(&gold, n_folds, seed)?;
    let mut rows = Vec::with_capacity(n_folds);
    for (f, test) in folds.iter().enumerate() {
        let train: Vec<usize> = folds
            .iter()
            .enumerate()
            .filter(|(g, _)| *g != f)
            .flat_map(|(_, fold)| fold.iter().copied())
            .collect();
        let p = predict_split(ctx, method, &train, cutoff_hours, seed)?;
        let preds: Vec<Label> = test.iter().map(|&j| decide(p[j])).collect();
        let truth: Vec<Label> = test.iter().map(|&j| gold[j].unwrap()).collect();
        rows.push(MetricsRow {
            method,
            cutoff: cutoff_hours,
            seed,
            fold: f,
            metrics: evaluate_classification(&preds, &truth)?,
        });
    }
    Ok(rows)
}

/// Metrics per cutoff, seed and fold for one method. `None` is the full
/// engagement history and sorts after every finite cutoff.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub method: Method,
    pub cutoffs: Vec<Option<f64>>,
    pub rows: Vec<MetricsRow>,
}

impl SweepResult {
    pub fn mean_accuracy(&self, cutoff: Option<f64>) -> Option<f64> {
        self.mean_of(cutoff, |m| m.accuracy)
    }

    pub fn mean_of(&self, cutoff: Option<f64>, field: impl Fn(&ClassificationMetrics) -> f64) -> Option<f64> {
        let vals: Vec<f64> = self
            .rows
            .iter()
            .filter(|r| r.cutoff == cutoff)
            .map(|r| field(&r.metrics))
            .collect();
        (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
    }
}

fn check_cutoffs(cutoffs: &[Option<f64>]) -> Result<()> {
    if cutoffs.is_empty() {
        return Err(Error::InvalidArgument("cutoff list is empty".into()));
    }
    let key = |c: &Option<f64>| c.unwrap_or(f64::INFINITY);
    for c in cutoffs.iter().flatten() {
        if !(*c >= 0.0) || !c.is_finite() {
            return Err(Error::InvalidArgument(format!("invalid cutoff {c}")));
        }
    }
    if cutoffs.windows(2).any(|w| key(&w[0]) >= key(&w[1])) {
        return Err(Error::InvalidArgument("cutoffs must be strictly increasing".into()));
    }
    Ok(())
}

/// Rebuild the networks for each cutoff and cross-validate `method` for each
/// seed. Rows come out ordered by cutoff, seed, fold.
pub fn early_detection_sweep(
    ctx: &CellContext<'_>,
    cutoffs: &[Option<f64>],
    method: Method,
    seeds: &[u64],
    n_folds: usize,
) -> Result<SweepResult> {
    check_cutoffs(cutoffs)?;
    let mut rows = Vec::new();
    for &cutoff in cutoffs {
        for &seed in seeds {
            rows.extend(cross_validate(ctx, method, cutoff, seed, n_folds)?);
        }
    }
    Ok(SweepResult {
        method,
        cutoffs: cutoffs.to_vec(),
        rows,
    })
}
