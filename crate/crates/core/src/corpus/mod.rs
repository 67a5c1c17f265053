//! Social-news corpus: record types, loading, validation and serialization.
//!
//! A corpus is five line-delimited JSON files living in one directory:
//! `news.jsonl`, `users.jsonl`, `publishers.jsonl`, `engagements.jsonl`
//! and `edges.jsonl`. Cross references are resolved at load time and any
//! record pointing at an unknown id is rejected.

mod networks;
mod text;

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use networks::{build_networks, InteractionNetworks, SparseBinary};
pub use text::{build_vocab, tokenize, vectorize_tfidf, Vocabulary};

pub const NEWS_FILE: &str = "news.jsonl";
pub const USERS_FILE: &str = "users.jsonl";
pub const PUBLISHERS_FILE: &str = "publishers.jsonl";
pub const ENGAGEMENTS_FILE: &str = "engagements.jsonl";
pub const EDGES_FILE: &str = "edges.jsonl";

/// Gold veracity label. Serialized as `1` (fake) / `0` (real).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum Label {
    Real,
    Fake,
}

impl Label {
    pub fn as_f64(self) -> f64 {
        match self {
            Label::Fake => 1.0,
            Label::Real => 0.0,
        }
    }

    pub fn is_fake(self) -> bool {
        self == Label::Fake
    }

    pub fn flip(self) -> Label {
        match self {
            Label::Fake => Label::Real,
            Label::Real => Label::Fake,
        }
    }
}

impl TryFrom<u8> for Label {
    type Error = String;

    fn try_from(v: u8) -> std::result::Result<Self, Self::Error> {
        match v {
            0 => Ok(Label::Real),
            1 => Ok(Label::Fake),
            other => Err(format!("label must be 0 or 1, got {other}")),
        }
    }
}

impl From<Label> for u8 {
    fn from(l: Label) -> u8 {
        match l {
            Label::Real => 0,
            Label::Fake => 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NewsArticle {
    pub id: String,
    pub publisher_id: String,
    pub publish_time: DateTime<Utc>,
    pub title: String,
    pub sentences: Vec<String>,
    #[serde(rename = "label", default, skip_serializing_if = "Option::is_none")]
    pub gold_label: Option<Label>,
}

impl NewsArticle {
    /// Title followed by every sentence, the text used for content features.
    pub fn full_text(&self) -> String {
        let mut s = self.title.clone();
        for sent in &self.sentences {
            s.push(' ');
            s.push_str(sent);
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserProfile {
    pub id: String,
    pub followers: u64,
    pub followees: u64,
    pub verified: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub register_age_days: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub credibility: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PublisherProfile {
    pub id: String,
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bias: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EngagementKind {
    Share,
    Comment,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Engagement {
    pub user_id: String,
    pub news_id: String,
    pub time: DateTime<Utc>,
    pub kind: EngagementKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub text: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FollowEdge {
    pub src: String,
    pub dst: String,
}

/// A comment attached to a news item, addressed by its position among that
/// item's comments in engagement-file order.
#[derive(Debug, Clone, Copy)]
pub struct CommentRef<'a> {
    pub position: usize,
    pub user: usize,
    pub engagement: &'a Engagement,
}

impl CommentRef<'_> {
    pub fn text(&self) -> &str {
        self.engagement.text.as_deref().unwrap_or("")
    }
}

/// Stable identifier of the `position`-th comment on `news_id`.
pub fn comment_id(news_id: &str, position: usize) -> String {
    format!("{news_id}:{position}")
}

/// A validated corpus. Construct through [`Corpus::new`] or the loaders;
/// every cross reference is guaranteed to resolve.
#[derive(Debug, Clone, Default)]
pub struct Corpus {
    news: Vec<NewsArticle>,
    users: Vec<UserProfile>,
    publishers: Vec<PublisherProfile>,
    engagements: Vec<Engagement>,
    edges: Vec<FollowEdge>,
    news_index: HashMap<String, usize>,
    user_index: HashMap<String, usize>,
    publisher_index: HashMap<String, usize>,
    // (user index, news index) per engagement, aligned with `engagements`
    engagement_refs: Vec<(usize, usize)>,
    edge_refs: Vec<(usize, usize)>,
    news_publisher: Vec<usize>,
    comments_by_news: Vec<Vec<usize>>,
}

impl PartialEq for Corpus {
    fn eq(&self, other: &Self) -> bool {
        self.news == other.news
            && self.users == other.users
            && self.publishers == other.publishers
            && self.engagements == other.engagements
            && self.edges == other.edges
    }
}

fn index_ids<'a>(
    kind: &'static str,
    ids: impl Iterator<Item = &'a String>,
) -> Result<HashMap<String, usize>> {
    let mut map = HashMap::new();
    for (i, id) in ids.enumerate() {
        if map.insert(id.clone(), i).is_some() {
            return Err(Error::DuplicateId {
                kind,
                id: id.clone(),
            });
        }
    }
    Ok(map)
}

fn resolve(
    map: &HashMap<String, usize>,
    kind: &'static str,
    id: &str,
    context: impl FnOnce() -> String,
) -> Result<usize> {
    map.get(id).copied().ok_or_else(|| Error::DanglingReference {
        kind,
        id: id.to_string(),
        context: context(),
    })
}

impl Corpus {
    pub fn new(
        news: Vec<NewsArticle>,
        users: Vec<UserProfile>,
        publishers: Vec<PublisherProfile>,
        engagements: Vec<Engagement>,
        edges: Vec<FollowEdge>,
    ) -> Result<Self> {
        let news_index = index_ids("news", news.iter().map(|n| &n.id))?;
        let user_index = index_ids("user", users.iter().map(|u| &u.id))?;
        let publisher_index = index_ids("publisher", publishers.iter().map(|p| &p.id))?;

        let mut news_publisher = Vec::with_capacity(news.len());
        for n in &news {
            if n.sentences.is_empty() {
                return Err(Error::InvalidRecord(format!(
                    "news `{}` has no sentences",
                    n.id
                )));
            }
            news_publisher.push(resolve(&publisher_index, "publisher", &n.publisher_id, || {
                format!("news `{}`", n.id)
            })?);
        }
        for u in &users {
            if let Some(c) = u.credibility {
                if !(0.0..=1.0).contains(&c) {
                    return Err(Error::InvalidRecord(format!(
                        "user `{}` credibility {c} outside [0, 1]",
                        u.id
                    )));
                }
            }
        }
        for p in &publishers {
            if let Some(b) = p.bias {
                if !(-1.0..=1.0).contains(&b) {
                    return Err(Error::InvalidRecord(format!(
                        "publisher `{}` bias {b} outside [-1, 1]",
                        p.id
                    )));
                }
            }
        }

        let mut engagement_refs = Vec::with_capacity(engagements.len());
        let mut comments_by_news = vec![Vec::new(); news.len()];
        for (k, e) in engagements.iter().enumerate() {
            let ctx = || format!("engagement #{k}");
            let u = resolve(&user_index, "user", &e.user_id, ctx)?;
            let j = resolve(&news_index, "news", &e.news_id, ctx)?;
            if e.kind == EngagementKind::Comment {
                if e.text.as_deref().map_or(true, |t| t.trim().is_empty()) {
                    return Err(Error::InvalidRecord(format!(
                        "comment engagement #{k} has no text"
                    )));
                }
                comments_by_news[j].push(k);
            }
            engagement_refs.push((u, j));
        }

        let mut edge_refs = Vec::with_capacity(edges.len());
        for (k, e) in edges.iter().enumerate() {
            let a = resolve(&user_index, "user", &e.src, || format!("edge #{k}"))?;
            let b = resolve(&user_index, "user", &e.dst, || format!("edge #{k}"))?;
            edge_refs.push((a, b));
        }

        Ok(Corpus {
            news,
            users,
            publishers,
            engagements,
            edges,
            news_index,
            user_index,
            publisher_index,
            engagement_refs,
            edge_refs,
            news_publisher,
            comments_by_news,
        })
    }

    pub fn news(&self) -> &[NewsArticle] {
        &self.news
    }

    pub fn users(&self) -> &[UserProfile] {
        &self.users
    }

    pub fn publishers(&self) -> &[PublisherProfile] {
        &self.publishers
    }

    pub fn engagements(&self) -> &[Engagement] {
        &self.engagements
    }

    pub fn edges(&self) -> &[FollowEdge] {
        &self.edges
    }

    pub fn news_position(&self, id: &str) -> Option<usize> {
        self.news_index.get(id).copied()
    }

    pub fn user_position(&self, id: &str) -> Option<usize> {
        self.user_index.get(id).copied()
    }

    pub fn publisher_position(&self, id: &str) -> Option<usize> {
        self.publisher_index.get(id).copied()
    }

    /// Publisher index of every news item.
    pub fn news_publisher(&self) -> &[usize] {
        &self.news_publisher
    }

    /// `(user, news)` indices of every engagement, in file order.
    pub fn engagement_refs(&self) -> &[(usize, usize)] {
        &self.engagement_refs
    }

    pub fn edge_refs(&self) -> &[(usize, usize)] {
        &self.edge_refs
    }

    pub fn gold_labels(&self) -> Vec<Option<Label>> {
        self.news.iter().map(|n| n.gold_label).collect()
    }

    /// Comments on news item `j`, in file order.
    pub fn comments(&self, j: usize) -> impl Iterator<Item = CommentRef<'_>> + '_ {
        self.comments_by_news[j]
            .iter()
            .enumerate()
            .map(move |(position, &k)| CommentRef {
                position,
                user: self.engagement_refs[k].0,
                engagement: &self.engagements[k],
            })
    }

    pub fn comment_count(&self, j: usize) -> usize {
        self.comments_by_news[j].len()
    }

    /// Hours between publication of the engaged item and the engagement.
    pub fn engagement_delay_hours(&self, k: usize) -> f64 {
        let j = self.engagement_refs[k].1;
        let delta = self.engagements[k].time - self.news[j].publish_time;
        delta.num_milliseconds() as f64 / 3_600_000.0
    }

    /// Load the five record files. Missing files are treated as empty.
    pub fn load(
        news_path: &Path,
        users_path: &Path,
        publishers_path: &Path,
        engagements_path: &Path,
        edges_path: &Path,
    ) -> Result<Self> {
        let news = read_records(news_path)?;
        let users = read_records(users_path)?;
        let publishers = read_records(publishers_path)?;
        let engagements = read_records(engagements_path)?;
        let edges = read_records(edges_path)?;
        let corpus = Corpus::new(news, users, publishers, engagements, edges)?;
        for (k, _) in corpus.engagements.iter().enumerate() {
            if corpus.engagement_delay_hours(k) < 0.0 {
                log::warn!(
                    "engagement #{k} on `{}` precedes publication; kept",
                    corpus.engagements[k].news_id
                );
            }
        }
        Ok(corpus)
    }

    pub fn load_dir(dir: &Path) -> Result<Self> {
        Self::load(
            &dir.join(NEWS_FILE),
            &dir.join(USERS_FILE),
            &dir.join(PUBLISHERS_FILE),
            &dir.join(ENGAGEMENTS_FILE),
            &dir.join(EDGES_FILE),
        )
    }

    pub fn save_dir(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        write_records(&dir.join(NEWS_FILE), &self.news)?;
        write_records(&dir.join(USERS_FILE), &self.users)?;
        write_records(&dir.join(PUBLISHERS_FILE), &self.publishers)?;
        write_records(&dir.join(ENGAGEMENTS_FILE), &self.engagements)?;
        write_records(&dir.join(EDGES_FILE), &self.edges)?;
        Ok(())
    }

    /// Paths of the record files inside a corpus directory.
    pub fn files_in(dir: &Path) -> [PathBuf; 5] {
        [
            dir.join(NEWS_FILE),
            dir.join(USERS_FILE),
            dir.join(PUBLISHERS_FILE),
            dir.join(ENGAGEMENTS_FILE),
            dir.join(EDGES_FILE),
        ]
    }
}

/// Read a line-delimited JSON file. A missing file reads as empty; blank
/// lines are skipped; a malformed line reports its 1-based line number.
pub fn read_records<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let file = match File::open(path) {
        Ok(f) => f,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(e) => return Err(e.into()),
    };
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec = serde_json::from_str(&line).map_err(|e| Error::MalformedRecord {
            path: path.to_path_buf(),
            line: i + 1,
            message: e.to_string(),
        })?;
        out.push(rec);
    }
    Ok(out)
}

pub fn write_records<T: Serialize>(path: &Path, records: &[T]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for r in records {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}
