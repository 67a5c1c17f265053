//! Seeded synthetic social-news corpora with planted structure.
//!
//! What gets planted, and where it shows up:
//!
//! * publisher bias `o ~ U[-1, 1]`; an item is fake with probability
//!   `fake_fraction + 2 * bias_strength * (|o| - 0.5)`;
//! * users fall into a fake-prone and a reliable group whose credibility
//!   means differ by `credibility_gap`; a user picks fake items with weight
//!   `1 - c` and real items with weight `c`;
//! * follower edges stay inside the group with probability `homophily`;
//! * each article has one key sentence carrying a topic marker (`f*` for
//!   fake, `r*` for real, flipped with probability `(1 - content_signal) / 2`);
//! * comments on fake items carry mixed sentiment, comments on real items
//!   mostly follow the article's tone (the agreement grows with
//!   `credibility_gap`);
//! * a fraction `explainable_comment_rate` of the comments on fake items are
//!   rebuttals naming the key sentence's marker; [`GroundTruth`] records them.

use std::collections::BTreeSet;
use std::path::Path;

use chrono::{DateTime, Duration, TimeZone, Utc};
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Normal;
use serde::{Deserialize, Serialize};

use crate::corpus::{
    comment_id, read_records, write_records, Corpus, Engagement, EngagementKind, FollowEdge, Label,
    NewsArticle, PublisherProfile, UserProfile,
};
use crate::error::{Error, Result};
use crate::weaksup::Lexicon;

pub const GROUND_TRUTH_FILE: &str = "ground_truth.jsonl";

/// Rebuttal vocabulary used by explainable comments. Not in the lexicon.
pub const REBUTTAL_TOKENS: [&str; 4] = ["hoax", "debunked", "misleading", "fabricated"];

/// Engagement timestamps fall within this many hours of publication.
pub const ENGAGEMENT_HORIZON_HOURS: f64 = 96.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub n_news: usize,
    pub n_users: usize,
    pub n_publishers: usize,
    pub fake_fraction: f64,
    pub bias_strength: f64,
    pub credibility_gap: f64,
    pub homophily: f64,
    pub vocab_size: usize,
    /// Size of each marker pool (fake and real).
    pub fake_topic_tokens: usize,
    pub comments_per_news: f64,
    pub explainable_comment_rate: f64,
    pub seed: u64,
    pub sentences_per_news: usize,
    pub words_per_sentence: usize,
    pub engagements_per_user: usize,
    pub edges_per_user: usize,
    /// Probability that the key sentence's marker matches the article's class
    /// is `(1 + content_signal) / 2`.
    pub content_signal: f64,
    /// Number of word slots in the key sentence replaced by its marker.
    pub key_marker_count: usize,
    /// Probability that a non-key sentence carries a random marker.
    pub topic_noise: f64,
    /// Probability that a comment on a real item is a stray rebuttal.
    pub rebuttal_noise: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_news: 200,
            n_users: 500,
            n_publishers: 20,
            fake_fraction: 0.5,
            bias_strength: 0.6,
            credibility_gap: 0.6,
            homophily: 0.8,
            vocab_size: 300,
            fake_topic_tokens: 10,
            comments_per_news: 8.0,
            explainable_comment_rate: 0.5,
            seed: 0,
            sentences_per_news: 5,
            words_per_sentence: 8,
            engagements_per_user: 10,
            edges_per_user: 4,
            content_signal: 0.5,
            key_marker_count: 1,
            topic_noise: 0.3,
            rebuttal_noise: 0.15,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InfeasibleConfig(m.to_string()));
        let counts = [
            self.n_news,
            self.n_users,
            self.n_publishers,
            self.vocab_size,
            self.fake_topic_tokens,
            self.sentences_per_news,
            self.words_per_sentence,
            self.key_marker_count,
        ];
        if counts.iter().any(|&c| c == 0) {
            return bad("all counts must be >= 1");
        }
        if !(self.fake_fraction > 0.0 && self.fake_fraction < 1.0) {
            return bad("fake_fraction must lie in (0, 1)");
        }
        if self.n_news < 2 {
            return bad("need at least two news items to hold both classes");
        }
        let unit = [
            self.bias_strength,
            self.credibility_gap,
            self.homophily,
            self.explainable_comment_rate,
            self.content_signal,
            self.topic_noise,
            self.rebuttal_noise,
        ];
        if unit.iter().any(|r| !(0.0..=1.0).contains(r)) {
            return bad("rates must lie in [0, 1]");
        }
        if !(self.comments_per_news >= 0.0) {
            return bad("comments_per_news must be >= 0");
        }
        if self.engagements_per_user > self.n_news {
            return bad("engagements_per_user exceeds n_news");
        }
        Ok(())
    }
}

/// Explanation ground truth for one article.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthRecord {
    pub news_id: String,
    pub explaining_comment_ids: Vec<String>,
    pub explained_sentence_indices: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub records: Vec<GroundTruthRecord>,
    pub labels: Vec<Label>,
    /// generative probability that each item is fake, given its publisher
    pub fake_prior: Vec<f64>,
    pub user_credibility: Vec<f64>,
    pub user_fake_prone: Vec<bool>,
}

impl GroundTruth {
    pub fn save(&self, dir: &Path) -> Result<()> {
        write_records(&dir.join(GROUND_TRUTH_FILE), &self.records)
    }

    /// Read explanation records written by [`GroundTruth::save`].
    pub fn load_records(dir: &Path) -> Result<Vec<GroundTruthRecord>> {
        read_records(&dir.join(GROUND_TRUTH_FILE))
    }
}

fn epoch() -> DateTime<Utc> {
    Utc.with_ymd_and_hms(2020, 1, 1, 0, 0, 0).unwrap()
}

fn hours(h: f64) -> Duration {
    Duration::seconds((h * 3600.0).round() as i64)
}

struct Words<'a> {
    vocab_size: usize,
    positive: Vec<&'a str>,
    negative: Vec<&'a str>,
}

impl Words<'_> {
    fn filler(&self, rng: &mut impl Rng) -> String {
        format!("w{}", rng.random_range(0..self.vocab_size))
    }

    fn fillers(&self, rng: &mut impl Rng, k: usize) -> Vec<String> {
        (0..k).map(|_| self.filler(rng)).collect()
    }
}

fn marker(fake: bool, k: usize) -> String {
    if fake {
        format!("f{k}")
    } else {
        format!("r{k}")
    }
}

/// Generate a corpus and its ground truth; fully determined by `config`.
pub fn generate(config: &SynthConfig) -> Result<(Corpus, GroundTruth)> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let lexicon = Lexicon::bundled();
    let words = Words {
        vocab_size: config.vocab_size,
        positive: lexicon.tokens_with_sign(true),
        negative: lexicon.tokens_with_sign(false),
    };

    // publishers
    let publisher_bias: Vec<f64> = (0..config.n_publishers)
        .map(|_| rng.random_range(-1.0..=1.0))
        .collect();
    let publishers: Vec<PublisherProfile> = publisher_bias
        .iter()
        .enumerate()
        .map(|(k, &b)| PublisherProfile {
            id: format!("p{k}"),
            name: format!("Publisher {k}"),
            bias: Some(b),
        })
        .collect();

    // labels
    let mut news_publisher = Vec::with_capacity(config.n_news);
    let mut fake_prior = Vec::with_capacity(config.n_news);
    let mut labels = Vec::with_capacity(config.n_news);
    for _ in 0..config.n_news {
        let k = rng.random_range(0..config.n_publishers);
        let prior = (config.fake_fraction
            + 2.0 * config.bias_strength * (publisher_bias[k].abs() - 0.5))
            .clamp(0.02, 0.98);
        news_publisher.push(k);
        fake_prior.push(prior);
        labels.push(if rng.random::<f64>() < prior {
            Label::Fake
        } else {
            Label::Real
        });
    }
    if labels.iter().all(|l| *l == labels[0]) {
        labels[0] = labels[0].flip();
    }

    // article text
    let mut news = Vec::with_capacity(config.n_news);
    let mut key_sentence = Vec::with_capacity(config.n_news);
    let mut key_marker = Vec::with_capacity(config.n_news);
    let mut tone_positive = Vec::with_capacity(config.n_news);
    for j in 0..config.n_news {
        let fake = labels[j].is_fake();
        let key = rng.random_range(0..config.sentences_per_news);
        let own_class = rng.random::<f64>() < (1.0 + config.content_signal) / 2.0;
        let km = marker(fake == own_class, rng.random_range(0..config.fake_topic_tokens));
        let mut sentences = Vec::with_capacity(config.sentences_per_news);
        for s in 0..config.sentences_per_news {
            let mut toks = words.fillers(&mut rng, config.words_per_sentence);
            let slot = rng.random_range(0..toks.len());
            if s == key {
                toks[slot] = km.clone();
                let extra = config.key_marker_count.min(toks.len()) - 1;
                let others: Vec<usize> = (0..toks.len()).filter(|&i| i != slot).collect();
                for &i in others.choose_multiple(&mut rng, extra) {
                    toks[i] = km.clone();
                }
            } else if rng.random::<f64>() < config.topic_noise {
                let pool_fake = rng.random::<bool>();
                toks[slot] = marker(pool_fake, rng.random_range(0..config.fake_topic_tokens));
            }
            sentences.push(toks.join(" "));
        }
        let publish_time = epoch() + hours(j as f64 * 6.0 + rng.random_range(0.0..6.0));
        news.push(NewsArticle {
            id: format!("n{j}"),
            publisher_id: format!("p{}", news_publisher[j]),
            publish_time,
            title: words.fillers(&mut rng, 4).join(" "),
            sentences,
            gold_label: Some(labels[j]),
        });
        key_sentence.push(key);
        key_marker.push(km);
        tone_positive.push(rng.random::<bool>());
    }

    // users
    let spread = Normal::new(0.0, 0.1 * config.credibility_gap + 1e-12).expect("valid normal");
    let mut users = Vec::with_capacity(config.n_users);
    let mut user_credibility = Vec::with_capacity(config.n_users);
    let mut user_fake_prone = Vec::with_capacity(config.n_users);
    for i in 0..config.n_users {
        let prone = rng.random::<bool>();
        let centre = if prone {
            0.5 - config.credibility_gap / 2.0
        } else {
            0.5 + config.credibility_gap / 2.0
        };
        let c = (centre + spread.sample(&mut rng)).clamp(0.01, 0.99);
        let followers = Normal::<f64>::new(4.0, 1.5).unwrap().sample(&mut rng).exp().floor() as u64;
        let followees = Normal::<f64>::new(4.0, 1.0).unwrap().sample(&mut rng).exp().floor() as u64;
        let verified = rng.random::<f64>() < (0.1 + 0.2 * (c - 0.5)).clamp(0.0, 1.0);
        users.push(UserProfile {
            id: format!("u{i}"),
            followers,
            followees,
            verified,
            register_age_days: Some(rng.random_range(30..3000)),
            credibility: None,
        });
        user_credibility.push(c);
        user_fake_prone.push(prone);
    }

    let pick_weight = |c: f64, fake: bool| if fake { 1.0 - c } else { c };
    let mut engagements = Vec::new();

    // shares
    for i in 0..config.n_users {
        let c = user_credibility[i];
        let chosen = rand::seq::index::sample_weighted(
            &mut rng,
            config.n_news,
            |j| pick_weight(c, labels[j].is_fake()),
            config.engagements_per_user,
        )
        .map_err(|e| Error::InfeasibleConfig(e.to_string()))?;
        let mut chosen: Vec<usize> = chosen.into_iter().collect();
        chosen.sort_unstable();
        for j in chosen {
            let delay = rng.random_range(0.0..ENGAGEMENT_HORIZON_HOURS);
            engagements.push(Engagement {
                user_id: format!("u{i}"),
                news_id: format!("n{j}"),
                time: news[j].publish_time + hours(delay).max(Duration::seconds(1)),
                kind: EngagementKind::Share,
                text: None,
            });
        }
    }

    // comments
    let commenters_fake =
        WeightedIndex::new(user_credibility.iter().map(|&c| pick_weight(c, true))).unwrap();
    let commenters_real =
        WeightedIndex::new(user_credibility.iter().map(|&c| pick_weight(c, false))).unwrap();
    let disagree_real = 0.5 * (1.0 - config.credibility_gap).powi(2);
    let lo = (config.comments_per_news * 0.5).round() as usize;
    let hi = (config.comments_per_news * 1.5).round() as usize;
    let mut records = Vec::with_capacity(config.n_news);
    for j in 0..config.n_news {
        let fake = labels[j].is_fake();
        let n_comments = rng.random_range(lo..=hi.max(lo));
        let mut explaining = Vec::new();
        for position in 0..n_comments {
            let user = if fake {
                commenters_fake.sample(&mut rng)
            } else {
                commenters_real.sample(&mut rng)
            };
            let positive = if fake {
                rng.random::<bool>()
            } else {
                tone_positive[j] != (rng.random::<f64>() < disagree_real)
            };
            let sentiment = if positive {
                *words.positive.choose(&mut rng).unwrap()
            } else {
                *words.negative.choose(&mut rng).unwrap()
            };
            let mut toks = words.fillers(&mut rng, 3);
            toks.push(sentiment.to_string());
            let rebuttal = *REBUTTAL_TOKENS.choose(&mut rng).unwrap();
            if fake && rng.random::<f64>() < config.explainable_comment_rate {
                toks.push(rebuttal.to_string());
                toks.push(key_marker[j].clone());
                explaining.push(comment_id(&news[j].id, position));
            } else if !fake && rng.random::<f64>() < config.rebuttal_noise {
                toks.push(rebuttal.to_string());
                toks.push(marker(rng.random(), rng.random_range(0..config.fake_topic_tokens)));
            }
            // rotate so that the informative tokens are not always last
            let shift = rng.random_range(0..toks.len());
            toks.rotate_left(shift);
            let delay = rng.random_range(0.0..ENGAGEMENT_HORIZON_HOURS);
            engagements.push(Engagement {
                user_id: format!("u{user}"),
                news_id: news[j].id.clone(),
                time: news[j].publish_time + hours(delay).max(Duration::seconds(1)),
                kind: EngagementKind::Comment,
                text: Some(toks.join(" ")),
            });
        }
        let explained = if explaining.is_empty() {
            Vec::new()
        } else {
            vec![key_sentence[j]]
        };
        records.push(GroundTruthRecord {
            news_id: news[j].id.clone(),
            explaining_comment_ids: explaining,
            explained_sentence_indices: explained,
        });
    }

    // follower edges
    let groups: [Vec<usize>; 2] = [
        (0..config.n_users).filter(|&i| !user_fake_prone[i]).collect(),
        (0..config.n_users).filter(|&i| user_fake_prone[i]).collect(),
    ];
    let mut pairs = BTreeSet::new();
    if config.n_users > 1 {
        for i in 0..config.n_users {
            let own = &groups[user_fake_prone[i] as usize];
            for _ in 0..config.edges_per_user {
                let target = if rng.random::<f64>() < config.homophily {
                    if own.len() < 2 {
                        continue;
                    }
                    *own.choose(&mut rng).unwrap()
                } else {
                    rng.random_range(0..config.n_users)
                };
                if target != i {
                    pairs.insert((i.min(target), i.max(target)));
                }
            }
        }
    }
    let edges = pairs
        .into_iter()
        .map(|(a, b)| FollowEdge {
            src: format!("u{a}"),
            dst: format!("u{b}"),
        })
        .collect();

    let corpus = Corpus::new(news, users, publishers, engagements, edges)?;
    Ok((
        corpus,
        GroundTruth {
            records,
            labels,
            fake_prior,
            user_credibility,
            user_fake_prone,
        },
    ))
}

/// Accuracy of the Bayes-style rule that knows the planted parameters:
/// prior log-odds from the publisher plus `ln((1 - c) / c)` for every
/// distinct user who engaged with the item. Ties predict real.
pub fn planted_oracle_accuracy(corpus: &Corpus, truth: &GroundTruth) -> f64 {
    let n = corpus.news().len();
    if n == 0 {
        return 0.0;
    }
    let mut engaged: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); n];
    for &(u, j) in corpus.engagement_refs() {
        engaged[j].insert(u);
    }
    let correct = (0..n)
        .filter(|&j| {
            let prior = truth.fake_prior[j].clamp(1e-6, 1.0 - 1e-6);
            let mut log_odds = (prior / (1.0 - prior)).ln();
            for &u in &engaged[j] {
                let c = truth.user_credibility[u].clamp(0.01, 0.99);
                log_odds += ((1.0 - c) / c).ln();
            }
            let predicted = if log_odds > 0.0 { Label::Fake } else { Label::Real };
            predicted == truth.labels[j]
        })
        .count();
    correct as f64 / n as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> SynthConfig {
        SynthConfig {
            n_news: 40,
            n_users: 80,
            n_publishers: 6,
            ..Default::default()
        }
    }

    #[test]
    fn same_seed_same_corpus_and_different_seed_differs() {
        let (a, ga) = generate(&small()).unwrap();
        let (b, gb) = generate(&small()).unwrap();
        assert_eq!(a, b);
        assert_eq!(ga, gb);
        let (c, _) = generate(&SynthConfig { seed: 1, ..small() }).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn infeasible_configs_reported() {
        for cfg in [
            SynthConfig { n_news: 1, ..small() },
            SynthConfig { fake_fraction: 1.0, ..small() },
            SynthConfig { homophily: 1.5, ..small() },
            SynthConfig { n_users: 0, ..small() },
        ] {
            assert!(matches!(generate(&cfg), Err(Error::InfeasibleConfig(_))));
        }
    }

    #[test]
    fn full_homophily_keeps_edges_inside_groups() {
        let (corpus, truth) = generate(&SynthConfig {
            homophily: 1.0,
            ..small()
        })
        .unwrap();
        assert!(!corpus.edge_refs().is_empty());
        for &(a, b) in corpus.edge_refs() {
            assert_eq!(truth.user_fake_prone[a], truth.user_fake_prone[b]);
        }
    }

    #[test]
    fn engagements_within_horizon_and_both_classes_present() {
        let (corpus, truth) = generate(&small()).unwrap();
        for k in 0..corpus.engagements().len() {
            let h = corpus.engagement_delay_hours(k);
            assert!(h > 0.0 && h <= ENGAGEMENT_HORIZON_HOURS, "{h}");
        }
        assert!(truth.labels.iter().any(|l| l.is_fake()));
        assert!(truth.labels.iter().any(|l| !l.is_fake()));
    }

    #[test]
    fn key_sentence_repeats_its_marker() {
        let cfg = SynthConfig {
            key_marker_count: 3,
            topic_noise: 0.0,
            ..small()
        };
        let (corpus, truth) = generate(&cfg).unwrap();
        let mut checked = 0;
        for (j, rec) in truth.records.iter().enumerate() {
            let Some(&key) = rec.explained_sentence_indices.first() else { continue };
            let toks: Vec<&str> = corpus.news()[j].sentences[key].split(' ').collect();
            let markers = toks.iter().filter(|t| !t.starts_with('w')).count();
            assert_eq!(markers, 3);
            assert!(toks.iter().filter(|t| !t.starts_with('w')).all(|t| *t == toks.iter().find(|t| !t.starts_with('w')).copied().unwrap()));
            checked += 1;
        }
        assert!(checked > 0);
    }

    #[test]
    fn ground_truth_points_at_rebuttals() {
        let (corpus, truth) = generate(&small()).unwrap();
        let mut seen = 0;
        for (j, rec) in truth.records.iter().enumerate() {
            let comments: Vec<_> = corpus.comments(j).collect();
            for cid in &rec.explaining_comment_ids {
                let pos: usize = cid.rsplit(':').next().unwrap().parse().unwrap();
                let text = comments[pos].text();
                assert!(REBUTTAL_TOKENS.iter().any(|t| text.contains(t)));
                let key = rec.explained_sentence_indices[0];
                let sentence = &corpus.news()[j].sentences[key];
                assert!(text.split(' ').any(|t| (t.starts_with('f') || t.starts_with('r'))
                    && sentence.split(' ').any(|s| s == t)));
                seen += 1;
            }
        }
        assert!(seen > 0);
    }

    #[test]
    fn oracle_accuracy_extremes() {
        let strong = SynthConfig {
            credibility_gap: 1.0,
            bias_strength: 1.0,
            ..small()
        };
        let (c, t) = generate(&strong).unwrap();
        let acc = planted_oracle_accuracy(&c, &t);
        assert!(acc >= 0.95, "{acc}");
        let mut accs = Vec::new();
        for seed in 0..10 {
            let none = SynthConfig {
                credibility_gap: 0.0,
                bias_strength: 0.0,
                seed,
                ..small()
            };
            let (c, t) = generate(&none).unwrap();
            let a = planted_oracle_accuracy(&c, &t);
            assert!((0.0..=1.0).contains(&a));
            accs.push(a);
        }
        let mean = accs.iter().sum::<f64>() / accs.len() as f64;
        assert!((mean - 0.5).abs() < 0.1, "{mean}");
    }
}
