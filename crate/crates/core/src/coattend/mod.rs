//! Sentence/comment co-attention detector. Sentences and comments are encoded
//! independently by two bidirectional LSTMs with word attention, fused by
//! co-attention, and classified; the attention weights rank explanations.

mod io;
pub mod model;

#[cfg(test)]
mod tests;

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{comment_id, tokenize, Corpus, Label, Vocabulary};
use crate::error::{Error, Result};

pub use io::{read_model, write_model, MAGIC as DEFEND_MAGIC};
pub use model::{coattend, forward, loss_and_grads, softmax, CoAttention, Encoded, Forward, Params};

pub const UNK: &str = "<unk>";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CoAttendConfig {
    pub embed_dim: usize,
    /// per direction
    pub hidden_dim: usize,
    pub attn_dim: usize,
    pub max_sentences: usize,
    pub max_comments: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub dropout: f64,
    pub min_count: usize,
    pub max_vocab: usize,
    /// share of the training items held out for model selection
    pub validation_fraction: f64,
}

impl Default for CoAttendConfig {
    fn default() -> Self {
        CoAttendConfig {
            embed_dim: 32,
            hidden_dim: 16,
            attn_dim: 16,
            max_sentences: 20,
            max_comments: 30,
            learning_rate: 0.5,
            epochs: 30,
            batch_size: 8,
            seed: 0,
            dropout: 0.0,
            min_count: 2,
            max_vocab: 20_000,
            validation_fraction: 0.2,
        }
    }
}

impl CoAttendConfig {
    pub fn validate(&self) -> Result<()> {
        let dims = [
            self.embed_dim,
            self.hidden_dim,
            self.attn_dim,
            self.max_sentences,
            self.max_comments,
            self.batch_size,
            self.max_vocab,
        ];
        if dims.contains(&0) {
            return Err(Error::InvalidArgument("co-attention sizes must be >= 1".into()));
        }
        if !(self.learning_rate > 0.0) || !self.learning_rate.is_finite() {
            return Err(Error::InvalidArgument("learning_rate must be > 0".into()));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::InvalidArgument("dropout must be in [0, 1)".into()));
        }
        if !(0.0..1.0).contains(&self.validation_fraction) {
            return Err(Error::InvalidArgument("validation_fraction must be in [0, 1)".into()));
        }
        Ok(())
    }
}

/// Full model or one of the ablations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Full,
    /// classify from the article alone
    NoComments,
    /// classify from the comments alone
    NoNews,
    /// uniform averaging instead of co-attention
    NoCoattention,
}

impl Mode {
    pub const ALL: [Mode; 4] = [Mode::Full, Mode::NoComments, Mode::NoNews, Mode::NoCoattention];
    pub const ABLATIONS: [Mode; 3] = [Mode::NoComments, Mode::NoNews, Mode::NoCoattention];

    pub fn name(self) -> &'static str {
        match self {
            Mode::Full => "full",
            Mode::NoComments => "no_comments",
            Mode::NoNews => "no_news",
            Mode::NoCoattention => "no_coattention",
        }
    }

    fn code(self) -> u8 {
        self as u8
    }

    fn from_code(c: u8) -> Option<Mode> {
        Mode::ALL.into_iter().find(|m| m.code() == c)
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Mode::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::UnknownMethod(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoAttentionModel {
    pub config: CoAttendConfig,
    pub mode: Mode,
    /// index 0 is [`UNK`]
    pub vocab: Vocabulary,
    pub params: Params,
}

/// Vocabulary over sentences and comments of `items`, with [`UNK`] first.
pub fn build_text_vocab(corpus: &Corpus, items: &[usize], config: &CoAttendConfig) -> Vocabulary {
    let docs = items.iter().map(|&j| {
        let mut toks = tokenize(&corpus.news()[j].sentences.join(" "));
        for c in corpus.comments(j) {
            toks.extend(tokenize(c.text()));
        }
        toks
    });
    let base = Vocabulary::from_documents(docs, config.min_count, config.max_vocab.saturating_sub(1));
    let mut tokens = vec![UNK.to_string()];
    tokens.extend(base.tokens().iter().filter(|t| t.as_str() != UNK).cloned());
    Vocabulary::from_tokens(tokens)
}

fn lookup(vocab: &Vocabulary, text: &str) -> Vec<usize> {
    let ids: Vec<usize> = tokenize(text).iter().filter_map(|t| vocab.get(t)).collect();
    if ids.is_empty() {
        vec![0]
    } else {
        ids
    }
}

impl CoAttentionModel {
    pub fn new(config: CoAttendConfig, mode: Mode, vocab: Vocabulary) -> Result<Self> {
        config.validate()?;
        let params = Params::init(&config, vocab.len());
        Ok(CoAttentionModel {
            config,
            mode,
            vocab,
            params,
        })
    }

    /// Map news item `j` to token indices, truncating sentences and comments
    /// by position.
    pub fn encode(&self, corpus: &Corpus, j: usize) -> Encoded {
        let article = &corpus.news()[j];
        Encoded {
            sentences: article
                .sentences
                .iter()
                .take(self.config.max_sentences)
                .map(|s| lookup(&self.vocab, s))
                .collect(),
            comments: corpus
                .comments(j)
                .take(self.config.max_comments)
                .map(|c| lookup(&self.vocab, c.text()))
                .collect(),
            label: article.gold_label,
        }
    }

    pub fn forward(&self, item: &Encoded) -> Forward {
        model::forward(&self.params, self.mode, item)
    }

    pub fn predict(&self, corpus: &Corpus, j: usize) -> f64 {
        self.forward(&self.encode(corpus, j)).p_fake
    }

    /// Sentences and comments of news item `j` ranked by attention weight.
    pub fn explain(&self, corpus: &Corpus, j: usize) -> Explanation {
        let article = &corpus.news()[j];
        let out = self.forward(&self.encode(corpus, j));
        let sentences = rank(&out.a_s)
            .into_iter()
            .map(|(i, w)| RankedSentence {
                index: i,
                weight: w,
                text: article.sentences[i].clone(),
            })
            .collect();
        let comments = rank(&out.a_c)
            .into_iter()
            .map(|(i, w)| RankedComment {
                comment_id: comment_id(&article.id, i),
                position: i,
                weight: w,
                text: corpus.comments(j).nth(i).map(|c| c.text().to_string()).unwrap_or_default(),
            })
            .collect();
        Explanation {
            news_id: article.id.clone(),
            p_fake: out.p_fake,
            sentences,
            comments,
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        write_model(&mut f, self)?;
        use std::io::Write;
        f.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut f = std::io::BufReader::new(std::fs::File::open(path)?);
        read_model(&mut f)
    }

    /// Overwrite embedding rows from a text file of `token v1 v2 ...` lines.
    /// Returns the number of rows replaced.
    pub fn load_pretrained_embeddings(&mut self, path: &Path) -> Result<usize> {
        let text = std::fs::read_to_string(path)?;
        let dim = self.config.embed_dim;
        let mut replaced = 0;
        for (n, line) in text.lines().enumerate() {
            let mut parts = line.split_whitespace();
            let Some(token) = parts.next() else { continue };
            let values = parts
                .map(str::parse::<f64>)
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| Error::MalformedRecord {
                    path: path.to_path_buf(),
                    line: n + 1,
                    message: e.to_string(),
                })?;
            if values.len() != dim {
                return Err(Error::MalformedRecord {
                    path: path.to_path_buf(),
                    line: n + 1,
                    message: format!("expected {dim} values, found {}", values.len()),
                });
            }
            if let Some(i) = self.vocab.get(token) {
                self.params
                    .embedding
                    .row_mut(i)
                    .assign(&ndarray::Array1::from(values));
                replaced += 1;
            }
        }
        Ok(replaced)
    }
}

/// `(index, weight)` by descending weight, ties by index.
pub fn rank(weights: &ndarray::Array1<f64>) -> Vec<(usize, f64)> {
    let mut order: Vec<(usize, f64)> = weights.iter().copied().enumerate().collect();
    order.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    order
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedSentence {
    pub index: usize,
    pub weight: f64,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedComment {
    pub comment_id: String,
    pub position: usize,
    pub weight: f64,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Explanation {
    pub news_id: String,
    pub p_fake: f64,
    pub sentences: Vec<RankedSentence>,
    pub comments: Vec<RankedComment>,
}

impl Explanation {
    pub fn truncate(&mut self, k: usize) {
        self.sentences.truncate(k);
        self.comments.truncate(k);
    }
}

/// Per-epoch record of a training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    /// mean training loss before any update
    pub initial_loss: f64,
    /// mean mini-batch loss per epoch
    pub epoch_loss: Vec<f64>,
    pub validation_accuracy: Vec<f64>,
    /// 1-based; 0 means the initial parameters were kept
    pub best_epoch: usize,
}

fn accuracy(model: &CoAttentionModel, items: &[Encoded]) -> f64 {
    let correct = items
        .iter()
        .filter(|it| {
            let pred = if model.forward(it).p_fake > 0.5 {
                Label::Fake
            } else {
                Label::Real
            };
            Some(pred) == it.label
        })
        .count();
    correct as f64 / items.len().max(1) as f64
}

/// Seeded stratified split of `items` into (fit, validation).
fn validation_split(corpus: &Corpus, items: &[usize], fraction: f64, rng: &mut ChaCha8Rng) -> (Vec<usize>, Vec<usize>) {
    let mut fit = Vec::new();
    let mut val = Vec::new();
    for class in [Label::Real, Label::Fake] {
        let mut members: Vec<usize> = items
            .iter()
            .copied()
            .filter(|&j| corpus.news()[j].gold_label == Some(class))
            .collect();
        members.shuffle(rng);
        let n_val = (members.len() as f64 * fraction).round() as usize;
        let n_val = n_val.min(members.len().saturating_sub(1));
        val.extend_from_slice(&members[..n_val]);
        fit.extend_from_slice(&members[n_val..]);
    }
    fit.sort_unstable();
    val.sort_unstable();
    (fit, val)
}

/// Train on the gold-labeled news among `items` (all gold-labeled news when
/// `None`). Mini-batch gradient descent at a fixed rate; the parameters with
/// the best validation accuracy are returned, earlier epochs winning ties.
pub fn train_on(
    corpus: &Corpus,
    items: Option<&[usize]>,
    config: &CoAttendConfig,
    mode: Mode,
) -> Result<(CoAttentionModel, TrainReport)> {
    config.validate()?;
    let labeled: Vec<usize> = match items {
        Some(items) => items.iter().copied().filter(|&j| corpus.news()[j].gold_label.is_some()).collect(),
        None => (0..corpus.news().len()).filter(|&j| corpus.news()[j].gold_label.is_some()).collect(),
    };
    let fakes = labeled.iter().filter(|&&j| corpus.news()[j].gold_label == Some(Label::Fake)).count();
    if fakes == 0 || fakes == labeled.len() {
        return Err(Error::SingleClass);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let (fit_idx, val_idx) = validation_split(corpus, &labeled, config.validation_fraction, &mut rng);
    let vocab = build_text_vocab(corpus, &fit_idx, config);
    let mut model = CoAttentionModel::new(config.clone(), mode, vocab)?;
    let fit: Vec<Encoded> = fit_idx.iter().map(|&j| model.encode(corpus, j)).collect();
    let val: Vec<Encoded> = if val_idx.is_empty() {
        fit.clone()
    } else {
        val_idx.iter().map(|&j| model.encode(corpus, j)).collect()
    };
    let all: Vec<&Encoded> = fit.iter().collect();
    let initial_loss = loss_and_grads(&model.params, mode, &all, None).0;
    let mut best = model.params.clone();
    let mut best_acc = accuracy(&model, &val);
    let mut report = TrainReport {
        initial_loss,
        epoch_loss: Vec::with_capacity(config.epochs),
        validation_accuracy: Vec::with_capacity(config.epochs),
        best_epoch: 0,
    };
    let mut order: Vec<usize> = (0..fit.len()).collect();
    for epoch in 1..=config.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for chunk in order.chunks(config.batch_size) {
            let batch: Vec<&Encoded> = chunk.iter().map(|&i| &fit[i]).collect();
            let dropout = (config.dropout > 0.0).then_some((config.dropout, &mut rng));
            let (loss, grad) = loss_and_grads(&model.params, mode, &batch, dropout);
            if !loss.is_finite() {
                return Err(Error::Diverged(format!("non-finite loss in epoch {epoch}")));
            }
            total += loss * batch.len() as f64;
            model.params.descend(&grad, config.learning_rate);
        }
        if !model.params.all_finite() {
            return Err(Error::Diverged(format!("non-finite parameters after epoch {epoch}")));
        }
        report.epoch_loss.push(total / fit.len() as f64);
        let acc = accuracy(&model, &val);
        report.validation_accuracy.push(acc);
        log::debug!("epoch {epoch}: loss {:.4} validation accuracy {acc:.3}", total / fit.len() as f64);
        if acc > best_acc {
            best_acc = acc;
            best = model.params.clone();
            report.best_epoch = epoch;
        }
    }
    model.params = best;
    Ok((model, report))
}

/// Train the full model on every gold-labeled item.
pub fn train(corpus: &Corpus, config: &CoAttendConfig) -> Result<CoAttentionModel> {
    Ok(train_on(corpus, None, config, Mode::Full)?.0)
}

/// Train an ablated model on every gold-labeled item.
pub fn ablate(corpus: &Corpus, config: &CoAttendConfig, mode: Mode) -> Result<CoAttentionModel> {
    Ok(train_on(corpus, None, config, mode)?.0)
}
