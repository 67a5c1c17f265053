use std::collections::{BTreeMap, HashMap, HashSet};

use ndarray::Array2;

use super::Corpus;

/// Lowercase and split on anything that is not alphanumeric.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
    doc_freq: Vec<usize>,
    n_docs: usize,
}

impl Vocabulary {
    /// Keep tokens with document frequency >= `min_count`, most frequent
    /// first, ties broken lexicographically, truncated to `max_size`.
    pub fn from_documents<I, D>(docs: I, min_count: usize, max_size: usize) -> Self
    where
        I: IntoIterator<Item = D>,
        D: IntoIterator<Item = String>,
    {
        let mut df: BTreeMap<String, usize> = BTreeMap::new();
        let mut n_docs = 0;
        for doc in docs {
            n_docs += 1;
            let uniq: HashSet<String> = doc.into_iter().collect();
            for tok in uniq {
                *df.entry(tok).or_insert(0) += 1;
            }
        }
        let mut entries: Vec<(String, usize)> =
            df.into_iter().filter(|(_, c)| *c >= min_count.max(1)).collect();
        // BTreeMap iteration is lexicographic and the sort is stable
        entries.sort_by(|a, b| b.1.cmp(&a.1));
        entries.truncate(max_size);
        let mut vocab = Vocabulary::from_tokens(entries.iter().map(|(t, _)| t.clone()).collect());
        vocab.doc_freq = entries.into_iter().map(|(_, c)| c).collect();
        vocab.n_docs = n_docs;
        vocab
    }

    /// A vocabulary over a fixed token list, without frequency statistics.
    pub fn from_tokens(tokens: Vec<String>) -> Self {
        let index = tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i))
            .collect();
        let doc_freq = vec![0; tokens.len()];
        Vocabulary {
            tokens,
            index,
            doc_freq,
            n_docs: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn get(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    pub fn doc_freq(&self, i: usize) -> usize {
        self.doc_freq[i]
    }

    pub fn n_docs(&self) -> usize {
        self.n_docs
    }

    /// Smoothed inverse document frequency `1 + ln((1 + n) / (1 + df))`.
    pub fn idf(&self, i: usize) -> f64 {
        1.0 + ((1.0 + self.n_docs as f64) / (1.0 + self.doc_freq[i] as f64)).ln()
    }
}

/// Vocabulary over the news content (title plus sentences) of `corpus`.
pub fn build_vocab(corpus: &Corpus, min_count: usize, max_size: usize) -> Vocabulary {
    Vocabulary::from_documents(
        corpus.news().iter().map(|n| tokenize(&n.full_text())),
        min_count,
        max_size,
    )
}

/// TF-IDF content matrix, one L2-normalized row per news item.
pub fn vectorize_tfidf(corpus: &Corpus, vocab: &Vocabulary) -> Array2<f64> {
    let mut x = Array2::zeros((corpus.news().len(), vocab.len()));
    for (j, article) in corpus.news().iter().enumerate() {
        let mut row = x.row_mut(j);
        for tok in tokenize(&article.full_text()) {
            if let Some(t) = vocab.get(&tok) {
                row[t] += 1.0;
            }
        }
        for (t, v) in row.iter_mut().enumerate() {
            *v *= vocab.idf(t);
        }
        let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 0.0 {
            row.mapv_inplace(|v| v / norm);
        } else {
            log::warn!("news `{}` has no in-vocabulary tokens", article.id);
        }
    }
    x
}

#[cfg(test)]
mod tests {
    use super::*;

    fn docs(d: &[&str]) -> Vec<Vec<String>> {
        d.iter().map(|s| tokenize(s)).collect()
    }

    #[test]
    fn tokenize_examples() {
        assert_eq!(
            tokenize("St. Nicholas was white? Really??Lol"),
            vec!["st", "nicholas", "was", "white", "really", "lol"]
        );
        assert!(tokenize("").is_empty());
        assert_eq!(tokenize("AAA aaa"), vec!["aaa", "aaa"]);
    }

    #[test]
    fn vocab_threshold_excludes_rare() {
        let v = Vocabulary::from_documents(docs(&["a b", "a c"]), 2, usize::MAX);
        assert_eq!(v.tokens(), &["a".to_string()]);
    }

    #[test]
    fn vocab_no_filtering_keeps_everything() {
        let v = Vocabulary::from_documents(docs(&["b a", "c a"]), 1, usize::MAX);
        assert_eq!(v.tokens(), &["a", "b", "c"]);
        assert_eq!(v.get("a"), Some(0));
        assert_eq!(v.doc_freq(0), 2);
    }

    #[test]
    fn vocab_tie_at_cutoff_keeps_lexicographically_smaller() {
        let v = Vocabulary::from_documents(docs(&["z y x", "z", "x y"]), 1, 2);
        // z:2 x:2 y:2 -> x, y kept
        assert_eq!(v.tokens(), &["x", "y"]);
    }

    #[test]
    fn idf_ratio_for_common_vs_rare_token() {
        // n = 10, df = 10 and df = 1
        let mut d = vec!["common rare".to_string()];
        d.extend((0..9).map(|_| "common".to_string()));
        let v = Vocabulary::from_documents(d.iter().map(|s| tokenize(s)), 1, usize::MAX);
        let common = v.idf(v.get("common").unwrap());
        let rare = v.idf(v.get("rare").unwrap());
        assert!((common - 1.0).abs() < 1e-15);
        let expected_rare = 1.0 + (11.0f64 / 2.0).ln();
        assert!((rare - expected_rare).abs() < 1e-15);
        assert!((rare / common - 2.704_748_092_238_425).abs() < 1e-12);
    }
}
