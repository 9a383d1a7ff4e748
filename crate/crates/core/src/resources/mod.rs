//! Per-language lookup assets, loaded from a `key=path` manifest.
//!
//! ```text
//! language = EN
//! unigram_corpus = brown.txt        # or unigram_counts = brown.freq
//! hyphenation = hyph_en_US.dic
//! stopwords = stopwords_en.txt
//! rare_words = google-10000-english.txt
//! affixes = greek_latin_roots.txt
//! hypernyms = wordnet_hypernyms.tsv
//! # optional overrides
//! trigrams = brown.trigrams
//! mean_word_chars = 4.7
//! consonants = bcdfghjklmnpqrstvwxyz
//! hyph_left_min = 2
//! hyph_right_min = 2
//! ```
//!
//! Relative paths resolve against the manifest's directory. `unigram_*` and
//! `hyphenation` are mandatory; the other assets may be missing, in which
//! case the bundle records them in [`ResourceBundle::degraded`].

mod hyphenation;
mod unigram;

use std::collections::{BTreeMap, HashMap, HashSet};
use std::io::BufReader;
use std::path::{Path, PathBuf};

pub use hyphenation::{syllable_count, HyphenationDict};
pub use unigram::{build_unigram_model, char_trigrams, read_frequency_list, TrigramTable, UnigramModel};

use crate::data::Language;
use crate::error::{Error, Result};

/// A Greek/Latin root. `bio-` only matches word starts, `-logy` only word
/// ends, a bare root matches either.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Affix {
    pub text: String,
    pub prefix: bool,
    pub suffix: bool,
}

impl Affix {
    pub fn parse(raw: &str) -> Option<Self> {
        let raw = raw.trim();
        let text = raw.trim_matches('-').to_lowercase();
        if text.is_empty() {
            return None;
        }
        let (lead, trail) = (raw.starts_with('-'), raw.ends_with('-'));
        Some(Affix {
            text,
            prefix: !lead || trail,
            suffix: !trail || lead,
        })
    }

    pub fn matches(&self, word_lower: &str) -> bool {
        (self.prefix && word_lower.starts_with(&self.text)) || (self.suffix && word_lower.ends_with(&self.text))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResourceBundle {
    pub language: Language,
    pub unigram: UnigramModel,
    pub trigrams: TrigramTable,
    pub hyphenation: HyphenationDict,
    pub stopwords: Option<HashSet<String>>,
    /// Common words; a token is rare when it is NOT listed.
    pub rare_words: Option<HashSet<String>>,
    pub affixes: Option<Vec<Affix>>,
    pub hypernym_counts: Option<HashMap<String, f64>>,
    pub mean_word_chars: f64,
    /// Lowercase consonant letters; `None` selects the default Latin set.
    pub consonants: Option<HashSet<char>>,
    /// Names of optional assets that were not supplied.
    pub degraded: Vec<String>,
}

pub const OPTIONAL_ASSETS: [&str; 4] = ["stopwords", "rare_words", "affixes", "hypernyms"];

impl ResourceBundle {
    /// Bundle with only the mandatory assets; every optional list is absent.
    pub fn new(language: Language, unigram: UnigramModel, hyphenation: HyphenationDict) -> Self {
        let trigrams = TrigramTable::from_unigrams(&unigram);
        let mean_word_chars = unigram.mean_word_chars();
        ResourceBundle {
            language,
            unigram,
            trigrams,
            hyphenation,
            stopwords: None,
            rare_words: None,
            affixes: None,
            hypernym_counts: None,
            mean_word_chars,
            consonants: None,
            degraded: OPTIONAL_ASSETS.iter().map(|s| s.to_string()).collect(),
        }
    }

    pub fn is_degraded(&self) -> bool {
        !self.degraded.is_empty()
    }

    pub fn mark_present(&mut self, asset: &str) {
        self.degraded.retain(|a| a != asset);
    }
}

fn parse_manifest(text: &str) -> Result<BTreeMap<String, String>> {
    let mut entries = BTreeMap::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("manifest line {}: expected key=value", n + 1)))?;
        entries.insert(key.trim().to_string(), value.trim().to_string());
    }
    Ok(entries)
}

fn open(path: &Path) -> Result<BufReader<std::fs::File>> {
    std::fs::File::open(path)
        .map(BufReader::new)
        .map_err(|e| Error::io(path, e))
}

fn word_set(path: &Path) -> Result<HashSet<String>> {
    Ok(read_frequency_list(open(path)?)?
        .into_iter()
        .map(|(w, _)| w.to_lowercase())
        .collect())
}

pub fn load_bundle(manifest_path: &Path) -> Result<ResourceBundle> {
    let text = std::fs::read_to_string(manifest_path).map_err(|e| Error::io(manifest_path, e))?;
    let entries = parse_manifest(&text)?;
    let base = manifest_path.parent().unwrap_or(Path::new("."));
    let path_of = |key: &str| -> Option<PathBuf> { entries.get(key).map(|p| base.join(p)) };
    let number = |key: &str| -> Result<Option<f64>> {
        entries
            .get(key)
            .map(|v| {
                v.parse::<f64>()
                    .map_err(|_| Error::Config(format!("manifest key {key}: {v:?} is not a number")))
            })
            .transpose()
    };

    let language: Language = entries
        .get("language")
        .ok_or_else(|| Error::MissingResource("language".into()))?
        .parse()?;

    let unigram = if let Some(p) = path_of("unigram_corpus") {
        build_unigram_model(open(&p)?)?
    } else if let Some(p) = path_of("unigram_counts") {
        UnigramModel::from_counts(read_frequency_list(open(&p)?)?)?
    } else {
        return Err(Error::MissingResource("unigram_corpus".into()));
    };
    let mut hyphenation = match path_of("hyphenation") {
        Some(p) => HyphenationDict::load(&p)?,
        None => return Err(Error::MissingResource("hyphenation".into())),
    };
    if let Some(v) = number("hyph_left_min")? {
        hyphenation.left_min = v as usize;
    }
    if let Some(v) = number("hyph_right_min")? {
        hyphenation.right_min = v as usize;
    }

    let mut bundle = ResourceBundle::new(language, unigram, hyphenation);
    if let Some(p) = path_of("trigrams") {
        bundle.trigrams = TrigramTable::from_counts(read_frequency_list(open(&p)?)?);
    }
    if let Some(v) = number("mean_word_chars")? {
        bundle.mean_word_chars = v;
    }
    if !(bundle.mean_word_chars > 0.0 && bundle.mean_word_chars.is_finite()) {
        return Err(Error::Resource("mean_word_chars must be positive".into()));
    }
    if let Some(c) = entries.get("consonants") {
        bundle.consonants = Some(c.chars().flat_map(char::to_lowercase).collect());
    }
    if let Some(p) = path_of("stopwords") {
        bundle.stopwords = Some(word_set(&p)?);
        bundle.mark_present("stopwords");
    }
    if let Some(p) = path_of("rare_words") {
        bundle.rare_words = Some(word_set(&p)?);
        bundle.mark_present("rare_words");
    }
    if let Some(p) = path_of("affixes") {
        let affixes = read_frequency_list(open(&p)?)?
            .iter()
            .filter_map(|(a, _)| Affix::parse(a))
            .collect();
        bundle.affixes = Some(affixes);
        bundle.mark_present("affixes");
    }
    if let Some(p) = path_of("hypernyms") {
        let table = read_frequency_list(open(&p)?)?
            .into_iter()
            .map(|(lemma, c)| (lemma.to_lowercase(), c as f64))
            .collect();
        bundle.hypernym_counts = Some(table);
        bundle.mark_present("hypernyms");
    }
    Ok(bundle)
}
