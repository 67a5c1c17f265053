//! Scoring attention rankings against planted explanations.

use std::collections::HashSet;

use serde::Serialize;

use super::metrics::{average_precision, ndcg_at_k, random_average_precision, random_ndcg_at_k};
use crate::coattend::CoAttentionModel;
use crate::corpus::{comment_id, Corpus};
use crate::synthgen::GroundTruthRecord;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExplanationScores {
    /// items with at least one planted explaining comment
    pub items: usize,
    pub comment_ndcg: f64,
    pub comment_ndcg_random: f64,
    pub sentence_map: f64,
    pub sentence_map_random: f64,
}

/// Mean comment NDCG@k and sentence MAP of the model's attention over
/// `items`, next to the expected scores of a uniformly random ranking.
/// Items without explaining comments are skipped.
pub fn explanation_scores(
    model: &CoAttentionModel,
    corpus: &Corpus,
    truth: &[GroundTruthRecord],
    items: &[usize],
    k: usize,
) -> ExplanationScores {
    let mut s = ExplanationScores {
        items: 0,
        comment_ndcg: 0.0,
        comment_ndcg_random: 0.0,
        sentence_map: 0.0,
        sentence_map_random: 0.0,
    };
    for &j in items {
        let rec = &truth[j];
        if rec.explaining_comment_ids.is_empty() {
            continue;
        }
        let e = model.explain(corpus, j);
        let news_id = &corpus.news()[j].id;
        let relevant: HashSet<&str> = rec.explaining_comment_ids.iter().map(String::as_str).collect();
        // only encoded comments can be ranked
        let gains: Vec<f64> = (0..e.comments.len())
            .map(|i| if relevant.contains(comment_id(news_id, i).as_str()) { 1.0 } else { 0.0 })
            .collect();
        let ranking: Vec<usize> = e.comments.iter().map(|c| c.position).collect();
        s.comment_ndcg += ndcg_at_k(&ranking, &gains, k);
        s.comment_ndcg_random += random_ndcg_at_k(&gains, k);

        let sentences: HashSet<usize> = rec.explained_sentence_indices.iter().copied().collect();
        let ranking: Vec<usize> = e.sentences.iter().map(|r| r.index).collect();
        let in_range = sentences.iter().filter(|&&i| i < ranking.len()).count();
        s.sentence_map += average_precision(&ranking, &sentences).unwrap_or(0.0);
        s.sentence_map_random += random_average_precision(ranking.len(), in_range);
        s.items += 1;
    }
    if s.items > 0 {
        let n = s.items as f64;
        s.comment_ndcg /= n;
        s.comment_ndcg_random /= n;
        s.sentence_map /= n;
        s.sentence_map_random /= n;
    }
    s
}
