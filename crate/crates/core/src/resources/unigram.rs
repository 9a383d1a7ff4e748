use std::collections::HashMap;
use std::io::BufRead;

use crate::error::{Error, Result};

/// Case-folded token counts with add-one smoothed log probabilities.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct UnigramModel {
    counts: HashMap<String, u64>,
    total_tokens: u64,
}

impl UnigramModel {
    pub fn from_counts(counts: impl IntoIterator<Item = (String, u64)>) -> Result<Self> {
        let mut model = UnigramModel::default();
        for (token, count) in counts {
            if count == 0 {
                continue;
            }
            *model.counts.entry(token.to_lowercase()).or_insert(0) += count;
            model.total_tokens += count;
        }
        if model.total_tokens == 0 {
            return Err(Error::Resource("unigram model needs at least one token".into()));
        }
        Ok(model)
    }

    pub fn total_tokens(&self) -> u64 {
        self.total_tokens
    }

    pub fn vocab_size(&self) -> usize {
        self.counts.len()
    }

    pub fn count(&self, token: &str) -> u64 {
        self.counts.get(&token.to_lowercase()).copied().unwrap_or(0)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, u64)> {
        self.counts.iter().map(|(k, &v)| (k.as_str(), v))
    }

    /// `ln((count + 1) / (total + vocab + 1))`; unseen tokens share the
    /// single extra slot in the denominator.
    pub fn logprob(&self, token: &str) -> f64 {
        let numerator = (self.count(token) + 1) as f64;
        let denominator = (self.total_tokens + self.counts.len() as u64 + 1) as f64;
        (numerator / denominator).ln()
    }

    /// Token-weighted mean word length in characters.
    pub fn mean_word_chars(&self) -> f64 {
        let chars: u64 = self.iter().map(|(w, c)| w.chars().count() as u64 * c).sum();
        chars as f64 / self.total_tokens as f64
    }
}

/// Count tokens of a corpus given one tokenized sentence per line.
pub fn build_unigram_model<R: BufRead>(corpus: R) -> Result<UnigramModel> {
    let mut counts: HashMap<String, u64> = HashMap::new();
    for line in corpus.lines() {
        let line = line.map_err(|e| Error::io("<unigram corpus>", e))?;
        for tok in line.split_whitespace() {
            *counts.entry(tok.to_lowercase()).or_insert(0) += 1;
        }
    }
    if counts.is_empty() {
        return Err(Error::Resource("unigram corpus contains no tokens".into()));
    }
    UnigramModel::from_counts(counts)
}

/// `token<TAB>count` lines, or bare tokens counted once each.
pub fn read_frequency_list<R: BufRead>(reader: R) -> Result<Vec<(String, u64)>> {
    let mut out = Vec::new();
    for (n, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io("<frequency list>", e))?;
        let line = line.trim_end_matches(['\r', '\n']);
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let mut cols = line.split('\t');
        let token = cols.next().unwrap_or("").trim().to_string();
        let count = match cols.next().map(str::trim) {
            None | Some("") => 1,
            Some(c) => c.parse().map_err(|_| {
                Error::Resource(format!("frequency list line {}: count {c:?} is not an integer", n + 1))
            })?,
        };
        if !token.is_empty() {
            out.push((token, count));
        }
    }
    Ok(out)
}

/// Character trigram frequencies.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrigramTable {
    counts: HashMap<String, u64>,
    total: u64,
}

/// Overlapping lowercase character trigrams of a word, without boundary
/// markers. Words shorter than three characters have none.
pub fn char_trigrams(word: &str) -> Vec<String> {
    let chars: Vec<char> = word.chars().flat_map(char::to_lowercase).collect();
    chars.windows(3).map(|w| w.iter().collect()).collect()
}

impl TrigramTable {
    pub fn from_counts(counts: impl IntoIterator<Item = (String, u64)>) -> Self {
        let mut table = TrigramTable::default();
        for (tri, c) in counts {
            if c > 0 {
                *table.counts.entry(tri.to_lowercase()).or_insert(0) += c;
                table.total += c;
            }
        }
        table
    }

    /// Each vocabulary word contributes its count to every trigram it holds.
    pub fn from_unigrams(model: &UnigramModel) -> Self {
        let mut counts: HashMap<String, u64> = HashMap::new();
        for (word, c) in model.iter() {
            for tri in char_trigrams(word) {
                *counts.entry(tri).or_insert(0) += c;
            }
        }
        Self::from_counts(counts)
    }

    pub fn count(&self, trigram: &str) -> u64 {
        self.counts.get(trigram).copied().unwrap_or(0)
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn counts_toy_corpus() {
        let m = build_unigram_model("a b a".as_bytes()).unwrap();
        assert_eq!(m.count("a"), 2);
        assert_eq!(m.count("b"), 1);
        assert_eq!(m.total_tokens(), 3);
        assert_eq!(m.vocab_size(), 2);
    }

    #[test]
    fn blank_corpus_is_an_error() {
        assert!(build_unigram_model("\n\n  \n".as_bytes()).is_err());
        assert!(build_unigram_model("".as_bytes()).is_err());
    }

    #[test]
    fn smoothing_examples() {
        let m = build_unigram_model("a b a".as_bytes()).unwrap();
        assert_relative_eq!(m.logprob("a"), 0.5f64.ln(), epsilon = 1e-12);
        assert_relative_eq!(m.logprob("z"), (1.0f64 / 6.0).ln(), epsilon = 1e-12);
        assert_eq!(m.logprob("A"), m.logprob("a"));
    }

    #[test]
    fn lowercases_corpus() {
        let m = build_unigram_model("The the THE".as_bytes()).unwrap();
        assert_eq!(m.count("the"), 3);
        assert_eq!(m.vocab_size(), 1);
    }

    #[test]
    fn frequency_list_forms() {
        let list = read_frequency_list("the\t100\nof\nand\t7\n\n".as_bytes()).unwrap();
        assert_eq!(list, [("the".into(), 100), ("of".into(), 1), ("and".into(), 7)]);
        assert!(read_frequency_list("x\tmany\n".as_bytes()).is_err());
    }

    #[test]
    fn trigrams() {
        assert_eq!(char_trigrams("Cat"), ["cat"]);
        assert_eq!(char_trigrams("ab"), Vec::<String>::new());
        let m = UnigramModel::from_counts([("cats".to_string(), 2), ("at".to_string(), 5)]).unwrap();
        let t = TrigramTable::from_unigrams(&m);
        assert_eq!(t.count("cat"), 2);
        assert_eq!(t.count("ats"), 2);
        assert_eq!(t.total(), 4);
    }

    #[test]
    fn mean_word_chars_weighted() {
        let m = UnigramModel::from_counts([("abc".to_string(), 1), ("a".to_string(), 3)]).unwrap();
        assert_relative_eq!(m.mean_word_chars(), 6.0 / 4.0);
    }

    proptest! {
        #[test]
        fn smoothed_mass_never_exceeds_one(words in proptest::collection::vec("[a-e]{1,3}", 1..40)) {
            let corpus = words.join(" ");
            let m = build_unigram_model(corpus.as_bytes()).unwrap();
            let vocab_mass: f64 = m.iter().map(|(w, _)| m.logprob(w).exp()).sum();
            let oov_mass = m.logprob("<unseen>").exp();
            prop_assert!(vocab_mass + oov_mass <= 1.0 + 1e-12);
            prop_assert!((vocab_mass + oov_mass - 1.0).abs() < 1e-9);
        }
    }
}
