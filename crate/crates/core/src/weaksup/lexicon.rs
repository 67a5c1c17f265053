use std::collections::HashMap;
use std::path::Path;

use crate::error::{Error, Result};

const DEFAULT_LEXICON: &str = include_str!("../../data/lexicon.tsv");

/// Token valences in [-1, 1], read from `token<TAB>valence` lines.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Lexicon {
    valences: HashMap<String, f64>,
}

impl Lexicon {
    /// The small English valence list shipped with the crate.
    pub fn bundled() -> Self {
        Self::parse(DEFAULT_LEXICON).expect("bundled lexicon is well-formed")
    }

    pub fn from_pairs<'a>(pairs: impl IntoIterator<Item = (&'a str, f64)>) -> Self {
        Lexicon {
            valences: pairs.into_iter().map(|(t, v)| (t.to_lowercase(), v)).collect(),
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    /// Blank lines and lines starting with `#` are ignored.
    pub fn parse(text: &str) -> Result<Self> {
        let mut valences = HashMap::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim_end();
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let (tok, val) = line
                .split_once('\t')
                .ok_or_else(|| Error::InvalidRecord(format!("lexicon line {}: expected token<TAB>valence", i + 1)))?;
            let v: f64 = val
                .trim()
                .parse()
                .map_err(|_| Error::InvalidRecord(format!("lexicon line {}: bad valence `{val}`", i + 1)))?;
            if !(-1.0..=1.0).contains(&v) {
                return Err(Error::InvalidRecord(format!(
                    "lexicon line {}: valence {v} outside [-1, 1]",
                    i + 1
                )));
            }
            valences.insert(tok.trim().to_lowercase(), v);
        }
        Ok(Lexicon { valences })
    }

    pub fn valence(&self, token: &str) -> Option<f64> {
        self.valences.get(token).copied()
    }

    pub fn len(&self) -> usize {
        self.valences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.valences.is_empty()
    }

    /// Tokens with positive (or, with `positive = false`, negative) valence,
    /// sorted.
    pub fn tokens_with_sign(&self, positive: bool) -> Vec<&str> {
        let mut v: Vec<&str> = self
            .valences
            .iter()
            .filter(|(_, &x)| if positive { x > 0.0 } else { x < 0.0 })
            .map(|(t, _)| t.as_str())
            .collect();
        v.sort_unstable();
        v
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_parses() {
        let l = Lexicon::bundled();
        assert!(l.len() >= 30);
        assert!(l.valence("great").unwrap() > 0.0);
        assert!(l.valence("terrible").unwrap() < 0.0);
    }

    #[test]
    fn rejects_out_of_range() {
        assert!(Lexicon::parse("x\t1.5\n").is_err());
        assert!(Lexicon::parse("x 0.5\n").is_err());
    }
}
