//! Weak social supervision: labeling functions over users, publishers and
//! posts, and their aggregation into per-article label distributions.

mod lexicon;

use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::corpus::{tokenize, Corpus, InteractionNetworks, Label};

pub use lexicon::Lexicon;

pub const RULE_CREDIBILITY: &str = "credibility";
pub const RULE_BIAS: &str = "bias";
pub const RULE_SENTIMENT: &str = "sentiment";

/// The registered labeling functions, in evaluation order.
pub const RULES: [&str; 3] = [RULE_CREDIBILITY, RULE_BIAS, RULE_SENTIMENT];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Fake,
    Real,
    Abstain,
}

impl Verdict {
    pub fn flip(self) -> Verdict {
        match self {
            Verdict::Fake => Verdict::Real,
            Verdict::Real => Verdict::Fake,
            Verdict::Abstain => Verdict::Abstain,
        }
    }

    pub fn as_label(self) -> Option<Label> {
        match self {
            Verdict::Fake => Some(Label::Fake),
            Verdict::Real => Some(Label::Real),
            Verdict::Abstain => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WeakVote {
    pub news_id: String,
    pub rule_id: String,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LabelDistribution {
    pub p_fake: f64,
    pub p_real: f64,
}

impl LabelDistribution {
    pub const UNIFORM: LabelDistribution = LabelDistribution {
        p_fake: 0.5,
        p_real: 0.5,
    };

    /// Hard label; exact ties resolve to real.
    pub fn label(&self) -> Label {
        if self.p_fake > 0.5 {
            Label::Fake
        } else {
            Label::Real
        }
    }
}

/// Line-delimited export record for an aggregated distribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistributionRecord {
    pub news_id: String,
    pub p_fake: f64,
}

/// Per-rule weights: smoothed precision on gold items.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RuleWeights(pub BTreeMap<String, f64>);

impl RuleWeights {
    pub fn get(&self, rule: &str) -> f64 {
        self.0.get(rule).copied().unwrap_or(0.5)
    }
}

/// Thresholds of the three labeling functions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WeakSupParams {
    pub credibility_low: f64,
    pub credibility_high: f64,
    pub bias_threshold: f64,
    pub conflict_tau: f64,
    pub min_comments: usize,
}

impl Default for WeakSupParams {
    fn default() -> Self {
        WeakSupParams {
            credibility_low: 0.4,
            credibility_high: 0.6,
            bias_threshold: 0.5,
            conflict_tau: 0.5,
            min_comments: 3,
        }
    }
}

const CREDIBILITY_SMOOTHING: f64 = 1.0;

/// Per-user credibility inferred from the veracity of gold-labeled news the
/// user engaged with: `1 - (fake + a) / (labeled + 2a)` with `a = 1`.
///
/// Only engagements inside `cutoff_hours` count; each (user, news) pair is
/// counted once. A credibility value on the user profile takes precedence.
pub fn credibility_scores(
    corpus: &Corpus,
    gold: &[Option<Label>],
    cutoff_hours: Option<f64>,
) -> Vec<f64> {
    assert_eq!(gold.len(), corpus.news().len());
    let mut seen = HashSet::new();
    let mut labeled = vec![0usize; corpus.users().len()];
    let mut fake = vec![0usize; corpus.users().len()];
    for (k, &(u, j)) in corpus.engagement_refs().iter().enumerate() {
        if cutoff_hours.is_some_and(|c| corpus.engagement_delay_hours(k) > c) {
            continue;
        }
        let Some(label) = gold[j] else { continue };
        if !seen.insert((u, j)) {
            continue;
        }
        labeled[u] += 1;
        if label.is_fake() {
            fake[u] += 1;
        }
    }
    let a = CREDIBILITY_SMOOTHING;
    corpus
        .users()
        .iter()
        .enumerate()
        .map(|(i, profile)| {
            if let Some(c) = profile.credibility {
                c
            } else if labeled[i] == 0 {
                0.5
            } else {
                1.0 - (fake[i] as f64 + a) / (labeled[i] as f64 + 2.0 * a)
            }
        })
        .collect()
}

/// Mean credibility of the item's spreaders: below `low` votes fake, above
/// `high` votes real, otherwise (or with no spreaders) abstains.
pub fn lf_credibility(news: usize, networks: &InteractionNetworks, low: f64, high: f64) -> Verdict {
    let spreaders = networks.spreaders_of(news);
    if spreaders.is_empty() {
        return Verdict::Abstain;
    }
    let mean = spreaders.iter().map(|&i| networks.credibility[i]).sum::<f64>() / spreaders.len() as f64;
    if mean < low {
        Verdict::Fake
    } else if mean > high {
        Verdict::Real
    } else {
        Verdict::Abstain
    }
}

/// Partisan publishers publish fake news: `|bias| > threshold` votes fake.
pub fn lf_bias(news: usize, networks: &InteractionNetworks, threshold: f64) -> Verdict {
    let k = networks.publisher_of(news);
    if !networks.bias_known[k] {
        Verdict::Abstain
    } else if networks.bias[k].abs() > threshold {
        Verdict::Fake
    } else {
        Verdict::Real
    }
}

/// Mean valence of the in-lexicon tokens of `text`, 0 when there are none.
pub fn sentiment_score(text: &str, lexicon: &Lexicon) -> f64 {
    let (sum, n) = tokenize(text)
        .iter()
        .filter_map(|t| lexicon.valence(t))
        .fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

/// Conflict `4 * frac_positive * frac_negative` over the comments on `news`
/// inside the window, together with the number of comments considered.
pub fn comment_conflict(
    news: usize,
    corpus: &Corpus,
    lexicon: &Lexicon,
    cutoff_hours: Option<f64>,
) -> (f64, usize) {
    let publish = corpus.news()[news].publish_time;
    let (mut pos, mut neg, mut total) = (0usize, 0usize, 0usize);
    for c in corpus.comments(news) {
        if let Some(limit) = cutoff_hours {
            let delay = (c.engagement.time - publish).num_milliseconds() as f64 / 3_600_000.0;
            if delay > limit {
                continue;
            }
        }
        total += 1;
        let s = sentiment_score(c.text(), lexicon);
        if s > 0.0 {
            pos += 1;
        } else if s < 0.0 {
            neg += 1;
        }
    }
    if total == 0 {
        return (0.0, 0);
    }
    let n = total as f64;
    (4.0 * (pos as f64 / n) * (neg as f64 / n), total)
}

/// Conflicting viewpoints in the comments signal fake news.
pub fn lf_sentiment(
    news: usize,
    corpus: &Corpus,
    lexicon: &Lexicon,
    tau: f64,
    min_comments: usize,
    cutoff_hours: Option<f64>,
) -> Verdict {
    let (conflict, total) = comment_conflict(news, corpus, lexicon, cutoff_hours);
    if total == 0 {
        Verdict::Abstain
    } else if conflict > tau {
        Verdict::Fake
    } else if total >= min_comments {
        Verdict::Real
    } else {
        Verdict::Abstain
    }
}

/// Run every registered rule on every news item. Votes are ordered by news
/// then by rule.
pub fn apply_rules(
    corpus: &Corpus,
    networks: &InteractionNetworks,
    lexicon: &Lexicon,
    params: &WeakSupParams,
) -> Vec<WeakVote> {
    let mut votes = Vec::with_capacity(corpus.news().len() * RULES.len());
    for (j, article) in corpus.news().iter().enumerate() {
        for rule in RULES {
            let verdict = match rule {
                RULE_CREDIBILITY => {
                    lf_credibility(j, networks, params.credibility_low, params.credibility_high)
                }
                RULE_BIAS => lf_bias(j, networks, params.bias_threshold),
                RULE_SENTIMENT => lf_sentiment(
                    j,
                    corpus,
                    lexicon,
                    params.conflict_tau,
                    params.min_comments,
                    networks.cutoff,
                ),
                _ => unreachable!(),
            };
            votes.push(WeakVote {
                news_id: article.id.clone(),
                rule_id: rule.to_string(),
                verdict,
            });
        }
    }
    votes
}

/// Laplace-smoothed precision `(correct + 1) / (non_abstain + 2)` of each
/// rule on the gold-labeled items. `gold` maps news id to label.
pub fn estimate_rule_weights<'a>(
    votes: &[WeakVote],
    gold: impl Fn(&str) -> Option<Label>,
    rules: impl IntoIterator<Item = &'a str>,
) -> RuleWeights {
    let mut tally: BTreeMap<String, (usize, usize)> =
        rules.into_iter().map(|r| (r.to_string(), (0, 0))).collect();
    for v in votes {
        let entry = tally.entry(v.rule_id.clone()).or_insert((0, 0));
        let (Some(truth), Some(said)) = (gold(&v.news_id), v.verdict.as_label()) else {
            continue;
        };
        entry.1 += 1;
        if truth == said {
            entry.0 += 1;
        }
    }
    RuleWeights(
        tally
            .into_iter()
            .map(|(r, (correct, total))| (r, (correct as f64 + 1.0) / (total as f64 + 2.0)))
            .collect(),
    )
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Independent log-odds voting: each non-abstaining vote adds
/// `ln(w / (1 - w))` to its side, with `w` clamped to [0.01, 0.99].
pub fn aggregate<'a>(votes: impl IntoIterator<Item = &'a WeakVote>, weights: &RuleWeights) -> LabelDistribution {
    let mut margin = 0.0;
    let mut any = false;
    for v in votes {
        let w = weights.get(&v.rule_id).clamp(0.01, 0.99);
        let log_odds = (w / (1.0 - w)).ln();
        match v.verdict {
            Verdict::Fake => margin += log_odds,
            Verdict::Real => margin -= log_odds,
            Verdict::Abstain => continue,
        }
        any = true;
    }
    if !any {
        return LabelDistribution::UNIFORM;
    }
    LabelDistribution {
        p_fake: sigmoid(margin),
        p_real: sigmoid(-margin),
    }
}

/// Aggregate votes for every news item of `corpus`, in corpus order.
pub fn aggregate_all(corpus: &Corpus, votes: &[WeakVote], weights: &RuleWeights) -> Vec<LabelDistribution> {
    let mut per_news: Vec<Vec<&WeakVote>> = vec![Vec::new(); corpus.news().len()];
    for v in votes {
        if let Some(j) = corpus.news_position(&v.news_id) {
            per_news[j].push(v);
        }
    }
    per_news
        .into_iter()
        .map(|vs| aggregate(vs, weights))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn vote(rule: &str, verdict: Verdict) -> WeakVote {
        WeakVote {
            news_id: "n".into(),
            rule_id: rule.into(),
            verdict,
        }
    }

    #[test]
    fn rule_weights_smoothed_precision() {
        let mut votes = Vec::new();
        for k in 0..10 {
            votes.push(WeakVote {
                news_id: format!("n{k}"),
                rule_id: "r".into(),
                verdict: if k < 9 { Verdict::Fake } else { Verdict::Real },
            });
            votes.push(WeakVote {
                news_id: format!("n{k}"),
                rule_id: "mute".into(),
                verdict: Verdict::Abstain,
            });
            votes.push(WeakVote {
                news_id: format!("n{k}"),
                rule_id: "half".into(),
                verdict: if k < 5 { Verdict::Fake } else { Verdict::Real },
            });
        }
        let w = estimate_rule_weights(&votes, |_| Some(Label::Fake), ["r", "mute", "half"]);
        assert!((w.get("r") - 10.0 / 12.0).abs() < 1e-15);
        assert_eq!(w.get("mute"), 0.5);
        assert_eq!(w.get("half"), 0.5);
    }

    #[test]
    fn aggregate_examples() {
        let weights = RuleWeights([("a".to_string(), 10.0 / 12.0), ("b".to_string(), 10.0 / 12.0)].into());
        assert_eq!(aggregate(&[], &weights), LabelDistribution::UNIFORM);
        let one = aggregate(&[vote("a", Verdict::Fake)], &weights);
        // sigma(ln(w / (1 - w))) = w
        assert!((one.p_fake - 10.0 / 12.0).abs() < 1e-12);
        let sym = aggregate(&[vote("a", Verdict::Fake), vote("b", Verdict::Real)], &weights);
        assert_eq!(sym.p_fake, 0.5);
        assert_eq!(sym.p_real, 0.5);
        let abstain = aggregate(&[vote("a", Verdict::Abstain)], &weights);
        assert_eq!(abstain, LabelDistribution::UNIFORM);
    }

    #[test]
    fn sentiment_examples() {
        let lex = Lexicon::from_pairs([("up", 1.0), ("down", -1.0)]);
        assert_eq!(sentiment_score("up UP up", &lex), 1.0);
        assert_eq!(sentiment_score("nothing here", &lex), 0.0);
        assert_eq!(sentiment_score("up down", &lex), 0.0);
        assert_eq!(sentiment_score("", &lex), 0.0);
    }

    fn arb_verdict() -> impl Strategy<Value = Verdict> {
        prop_oneof![Just(Verdict::Fake), Just(Verdict::Real), Just(Verdict::Abstain)]
    }

    proptest! {
        #[test]
        fn distributions_normalized_and_relabel_symmetric(
            vs in proptest::collection::vec((0usize..3, arb_verdict()), 0..12),
            ws in proptest::collection::vec(0.0f64..=1.0, 3),
        ) {
            let weights = RuleWeights((0..3).map(|r| (format!("r{r}"), ws[r])).collect());
            let votes: Vec<WeakVote> = vs.iter().map(|&(r, v)| vote(&format!("r{r}"), v)).collect();
            let flipped: Vec<WeakVote> = vs.iter().map(|&(r, v)| vote(&format!("r{r}"), v.flip())).collect();
            let d = aggregate(&votes, &weights);
            let f = aggregate(&flipped, &weights);
            prop_assert!((d.p_fake + d.p_real - 1.0).abs() <= 1e-12);
            prop_assert!((0.0..=1.0).contains(&d.p_fake) && (0.0..=1.0).contains(&d.p_real));
            prop_assert_eq!(d.p_fake, f.p_real);
            prop_assert_eq!(d.p_real, f.p_fake);
        }
    }
}
