use ndarray::{Array1, Array2};

use super::Corpus;
use crate::error::{Error, Result};

/// Binary sparse matrix stored as sorted column lists per row.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SparseBinary {
    rows: usize,
    cols: usize,
    indices: Vec<Vec<usize>>,
}

impl SparseBinary {
    /// Build from `(row, col)` pairs; duplicates collapse to one entry.
    pub fn from_pairs(rows: usize, cols: usize, pairs: impl IntoIterator<Item = (usize, usize)>) -> Self {
        let mut indices = vec![Vec::new(); rows];
        for (i, j) in pairs {
            assert!(i < rows && j < cols, "entry ({i}, {j}) outside {rows}x{cols}");
            indices[i].push(j);
        }
        for r in &mut indices {
            r.sort_unstable();
            r.dedup();
        }
        SparseBinary {
            rows,
            cols,
            indices,
        }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self::from_pairs(rows, cols, std::iter::empty())
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn nnz(&self) -> usize {
        self.indices.iter().map(Vec::len).sum()
    }

    pub fn row(&self, i: usize) -> &[usize] {
        &self.indices[i]
    }

    pub fn get(&self, i: usize, j: usize) -> bool {
        self.indices[i].binary_search(&j).is_ok()
    }

    /// Nonzero entries in row-major order.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.indices
            .iter()
            .enumerate()
            .flat_map(|(i, r)| r.iter().map(move |&j| (i, j)))
    }

    pub fn transpose(&self) -> Self {
        Self::from_pairs(self.cols, self.rows, self.iter().map(|(i, j)| (j, i)))
    }

    pub fn to_dense(&self) -> Array2<f64> {
        let mut m = Array2::zeros((self.rows, self.cols));
        for (i, j) in self.iter() {
            m[[i, j]] = 1.0;
        }
        m
    }

    /// `self * rhs` for a dense right-hand side.
    pub fn dot(&self, rhs: &Array2<f64>) -> Array2<f64> {
        assert_eq!(self.cols, rhs.nrows());
        let mut out = Array2::zeros((self.rows, rhs.ncols()));
        for (i, r) in self.indices.iter().enumerate() {
            let mut o = out.row_mut(i);
            for &j in r {
                o += &rhs.row(j);
            }
        }
        out
    }

    /// Returns `true` when every entry of `self` is also set in `other`.
    pub fn is_subset_of(&self, other: &SparseBinary) -> bool {
        self.shape() == other.shape() && self.iter().all(|(i, j)| other.get(i, j))
    }
}

/// Matrix view of a corpus consumed by the learners.
#[derive(Debug, Clone)]
pub struct InteractionNetworks {
    /// news x term content matrix, nonnegative
    pub content: Array2<f64>,
    /// user x user follower adjacency, symmetric, zero diagonal
    pub adjacency: SparseBinary,
    /// user x news: user engaged with news inside the window
    pub spreading: SparseBinary,
    /// publisher x news, exactly one entry per column
    pub publishing: SparseBinary,
    /// partisan bias per publisher, missing treated as 0
    pub bias: Array1<f64>,
    pub bias_known: Vec<bool>,
    /// per-user credibility in [0, 1]
    pub credibility: Array1<f64>,
    /// engagement window in hours, `None` for all engagements
    pub cutoff: Option<f64>,
    news_publisher: Vec<usize>,
    spreaders: Vec<Vec<usize>>,
}

impl InteractionNetworks {
    pub fn n_news(&self) -> usize {
        self.content.nrows()
    }

    pub fn n_terms(&self) -> usize {
        self.content.ncols()
    }

    pub fn n_users(&self) -> usize {
        self.adjacency.shape().0
    }

    pub fn n_publishers(&self) -> usize {
        self.bias.len()
    }

    pub fn publisher_of(&self, news: usize) -> usize {
        self.news_publisher[news]
    }

    /// Users that engaged with news `j` inside the window.
    pub fn spreaders_of(&self, news: usize) -> &[usize] {
        &self.spreaders[news]
    }

    /// Assemble networks from parts, checking every structural invariant.
    #[allow(clippy::too_many_arguments)]
    pub fn from_parts(
        content: Array2<f64>,
        adjacency: SparseBinary,
        spreading: SparseBinary,
        publishing: SparseBinary,
        bias: Array1<f64>,
        bias_known: Vec<bool>,
        credibility: Array1<f64>,
        cutoff: Option<f64>,
    ) -> Result<Self> {
        let n = content.nrows();
        let u = credibility.len();
        let r = bias.len();
        let check = |ok: bool, what: &str| {
            if ok {
                Ok(())
            } else {
                Err(Error::ShapeMismatch(what.to_string()))
            }
        };
        check(adjacency.shape() == (u, u), "adjacency must be users x users")?;
        check(spreading.shape() == (u, n), "spreading must be users x news")?;
        check(publishing.shape() == (r, n), "publishing must be publishers x news")?;
        check(bias_known.len() == r, "bias_known length")?;
        if content.iter().any(|&v| v < 0.0 || !v.is_finite()) {
            return Err(Error::InvalidArgument("content matrix must be finite and >= 0".into()));
        }
        if adjacency.iter().any(|(i, k)| i == k || !adjacency.get(k, i)) {
            return Err(Error::InvalidArgument("adjacency must be symmetric with zero diagonal".into()));
        }
        if credibility.iter().any(|c| !(0.0..=1.0).contains(c)) {
            return Err(Error::InvalidArgument("credibility outside [0, 1]".into()));
        }
        let mut news_publisher = vec![usize::MAX; n];
        for (k, j) in publishing.iter() {
            if news_publisher[j] != usize::MAX {
                return Err(Error::InvalidArgument(format!("news {j} has two publishers")));
            }
            news_publisher[j] = k;
        }
        if news_publisher.iter().any(|&k| k == usize::MAX) {
            return Err(Error::InvalidArgument("news without publisher".into()));
        }
        let mut spreaders = vec![Vec::new(); n];
        for (i, j) in spreading.iter() {
            spreaders[j].push(i);
        }
        Ok(InteractionNetworks {
            content,
            adjacency,
            spreading,
            publishing,
            bias,
            bias_known,
            credibility,
            cutoff,
            news_publisher,
            spreaders,
        })
    }

    /// Row-normalized publishing matrix applied to `d`: mean news
    /// representation per publisher (zero rows for publishers without news).
    pub fn publisher_means(&self, d: &Array2<f64>) -> Array2<f64> {
        let mut out = self.publishing.dot(d);
        for (k, mut row) in out.rows_mut().into_iter().enumerate() {
            let cnt = self.publishing.row(k).len();
            if cnt > 0 {
                row.mapv_inplace(|v| v / cnt as f64);
            }
        }
        out
    }

    /// Dense row-normalized publishing matrix.
    pub fn publishing_normalized(&self) -> Array2<f64> {
        let mut p = self.publishing.to_dense();
        for mut row in p.rows_mut() {
            let s = row.sum();
            if s > 0.0 {
                row.mapv_inplace(|v| v / s);
            }
        }
        p
    }
}

/// Materialize the interaction networks of `corpus`.
///
/// `cutoff_hours` restricts the spreading matrix to engagements made at most
/// that many hours after publication (`None` keeps all). `credibility` holds
/// one score per user, normally from [`crate::weaksup::credibility_scores`].
pub fn build_networks(
    corpus: &Corpus,
    content: Array2<f64>,
    cutoff_hours: Option<f64>,
    credibility: &[f64],
) -> Result<InteractionNetworks> {
    let n = corpus.news().len();
    let u = corpus.users().len();
    let r = corpus.publishers().len();
    if let Some(c) = cutoff_hours {
        if !(c >= 0.0) {
            return Err(Error::InvalidArgument(format!("cutoff must be >= 0, got {c}")));
        }
    }
    if content.nrows() != n {
        return Err(Error::ShapeMismatch(format!(
            "content has {} rows for {n} news",
            content.nrows()
        )));
    }
    if credibility.len() != u {
        return Err(Error::ShapeMismatch(format!(
            "{} credibility scores for {u} users",
            credibility.len()
        )));
    }

    let spreading = SparseBinary::from_pairs(
        u,
        n,
        corpus
            .engagement_refs()
            .iter()
            .enumerate()
            .filter(|&(k, _)| cutoff_hours.map_or(true, |c| corpus.engagement_delay_hours(k) <= c))
            .map(|(_, &pair)| pair),
    );
    let adjacency = SparseBinary::from_pairs(
        u,
        u,
        corpus
            .edge_refs()
            .iter()
            .filter(|(a, b)| a != b)
            .flat_map(|&(a, b)| [(a, b), (b, a)]),
    );
    let publishing = SparseBinary::from_pairs(
        r,
        n,
        corpus.news_publisher().iter().enumerate().map(|(j, &k)| (k, j)),
    );
    let bias = corpus
        .publishers()
        .iter()
        .map(|p| p.bias.unwrap_or(0.0))
        .collect();
    let bias_known = corpus.publishers().iter().map(|p| p.bias.is_some()).collect();

    InteractionNetworks::from_parts(
        content,
        adjacency,
        spreading,
        publishing,
        bias,
        bias_known,
        Array1::from(credibility.to_vec()),
        cutoff_hours,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sparse_dot_matches_dense() {
        let s = SparseBinary::from_pairs(3, 4, [(0, 1), (0, 3), (2, 0), (2, 0)]);
        assert_eq!(s.nnz(), 3);
        let rhs = Array2::from_shape_fn((4, 2), |(i, j)| (i * 2 + j) as f64);
        assert_eq!(s.dot(&rhs), s.to_dense().dot(&rhs));
        assert_eq!(s.transpose().to_dense(), s.to_dense().t());
    }
}
