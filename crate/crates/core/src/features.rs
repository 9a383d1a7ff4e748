//! The 25 feature families and the extractor that computes them.
//!
//! Scalar families produce one entry named after the family. Bag families
//! produce `family:key` entries with counts. Vectors are sparse; an absent
//! name means zero.
//!
//! "Target tokens" are the sentence tokens overlapping the target span,
//! clipped to the span, so a target that covers part of a token only sees
//! the covered characters.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::annotate::{tokenize, word_shape, AnnotatedSentence, TokenAnnotation};
use crate::data::{char_slice, Instance};
use crate::error::{Error, Result};
use crate::model::Normalizers;
use crate::resources::{char_trigrams, syllable_count, ResourceBundle};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Family {
    // target word/MWE
    NerTagCounts,
    PosTagCounts,
    HypernymCount,
    LenTokens,
    LenTokensNorm,
    LenCharsNorm,
    UnigramProb,
    BagOfShapes,
    RareWordCount,
    RareTrigramCount,
    IsStop,
    IsNounphrase,
    AvgCharsPerWord,
    IobTags,
    // sub-word
    LemmaFeats,
    LenSylls,
    NumComplexPunct,
    CharNGramFeats,
    CharTriSum,
    CharTriAvg,
    ConsonantFreq,
    GrOrLat,
    IsCapitalised,
    // sentence
    SentLength,
    SentNGramFeats,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Level {
    Target,
    SubWord,
    Sentence,
}

impl Family {
    pub const ALL: [Family; 25] = [
        Family::NerTagCounts,
        Family::PosTagCounts,
        Family::HypernymCount,
        Family::LenTokens,
        Family::LenTokensNorm,
        Family::LenCharsNorm,
        Family::UnigramProb,
        Family::BagOfShapes,
        Family::RareWordCount,
        Family::RareTrigramCount,
        Family::IsStop,
        Family::IsNounphrase,
        Family::AvgCharsPerWord,
        Family::IobTags,
        Family::LemmaFeats,
        Family::LenSylls,
        Family::NumComplexPunct,
        Family::CharNGramFeats,
        Family::CharTriSum,
        Family::CharTriAvg,
        Family::ConsonantFreq,
        Family::GrOrLat,
        Family::IsCapitalised,
        Family::SentLength,
        Family::SentNGramFeats,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Family::NerTagCounts => "NER_tag_counts",
            Family::PosTagCounts => "pos_tag_counts",
            Family::HypernymCount => "hypernym_count",
            Family::LenTokens => "len_tokens",
            Family::LenTokensNorm => "len_tokens_norm",
            Family::LenCharsNorm => "len_chars_norm",
            Family::UnigramProb => "unigram_prob",
            Family::BagOfShapes => "bag_of_shapes",
            Family::RareWordCount => "rare_word_count",
            Family::RareTrigramCount => "rare_trigram_count",
            Family::IsStop => "is_stop",
            Family::IsNounphrase => "is_nounphrase",
            Family::AvgCharsPerWord => "avg_chars_per_word",
            Family::IobTags => "iob_tags",
            Family::LemmaFeats => "lemma_feats",
            Family::LenSylls => "len_sylls",
            Family::NumComplexPunct => "num_complex_punct",
            Family::CharNGramFeats => "char_n_gram_feats",
            Family::CharTriSum => "char_tri_sum",
            Family::CharTriAvg => "char_tri_avg",
            Family::ConsonantFreq => "consonant_freq",
            Family::GrOrLat => "gr_or_lat",
            Family::IsCapitalised => "is_capitalised",
            Family::SentLength => "sent_length",
            Family::SentNGramFeats => "sent_n_gram_feats",
        }
    }

    pub fn level(self) -> Level {
        use Family::*;
        match self {
            LemmaFeats | LenSylls | NumComplexPunct | CharNGramFeats | CharTriSum | CharTriAvg | ConsonantFreq
            | GrOrLat | IsCapitalised => Level::SubWord,
            SentLength | SentNGramFeats => Level::Sentence,
            _ => Level::Target,
        }
    }

    pub fn is_bag(self) -> bool {
        use Family::*;
        matches!(
            self,
            NerTagCounts | PosTagCounts | BagOfShapes | IobTags | LemmaFeats | CharNGramFeats | SentNGramFeats
        )
    }

    /// Optional bundle asset this family reads, if any.
    pub fn optional_resource(self) -> Option<&'static str> {
        match self {
            Family::HypernymCount => Some("hypernyms"),
            Family::RareWordCount => Some("rare_words"),
            Family::IsStop => Some("stopwords"),
            Family::GrOrLat => Some("affixes"),
            _ => None,
        }
    }

    /// Families whose values come from sidecar annotations.
    pub fn needs_annotations(self) -> bool {
        matches!(
            self,
            Family::NerTagCounts | Family::PosTagCounts | Family::IobTags | Family::IsNounphrase
        )
    }

    /// Family owning a feature name (`len_tokens`, `pos_tag_counts:NOUN`).
    pub fn of_feature(name: &str) -> Option<Family> {
        let family = name.split_once(':').map_or(name, |(f, _)| f);
        family.parse().ok()
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        // alternative spellings
        let s = match s {
            "char_ngram_feats" => "char_n_gram_feats",
            "pos_tag_count" => "pos_tag_counts",
            other => other,
        };
        Family::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| Error::UnknownFeature(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureSet {
    pub name: String,
    pub families: BTreeSet<Family>,
}

impl FeatureSet {
    pub fn new(name: impl Into<String>, families: impl IntoIterator<Item = Family>) -> Self {
        FeatureSet {
            name: name.into(),
            families: families.into_iter().collect(),
        }
    }

    pub fn monolingual() -> Self {
        Self::new("monolingual25", Family::ALL)
    }

    /// The five language-independent families kept after ablation.
    pub fn crosslingual() -> Self {
        Self::new(
            "crosslingual5",
            [
                Family::LenSylls,
                Family::LenTokens,
                Family::NumComplexPunct,
                Family::SentLength,
                Family::UnigramProb,
            ],
        )
    }

    /// Target length in tokens and in normalised characters.
    pub fn baseline() -> Self {
        Self::new("baseline", [Family::LenTokens, Family::LenCharsNorm])
    }

    /// `baseline`, `monolingual25`, `crosslingual5`, or a comma-separated
    /// family list.
    pub fn parse(spec: &str) -> Result<Self> {
        match spec.trim() {
            "baseline" => Ok(Self::baseline()),
            "monolingual25" | "monolingual" | "full" => Ok(Self::monolingual()),
            "crosslingual5" | "crosslingual" => Ok(Self::crosslingual()),
            list => {
                let families = list
                    .split(',')
                    .filter(|s| !s.trim().is_empty())
                    .map(str::parse)
                    .collect::<Result<BTreeSet<Family>>>()?;
                if families.is_empty() {
                    return Err(Error::UnknownFeature(list.to_string()));
                }
                Ok(FeatureSet {
                    name: "custom".into(),
                    families,
                })
            }
        }
    }

    pub fn contains(&self, family: Family) -> bool {
        self.families.contains(&family)
    }

    pub fn len(&self) -> usize {
        self.families.len()
    }

    pub fn is_empty(&self) -> bool {
        self.families.is_empty()
    }

    pub fn with(&self, family: Family) -> Self {
        let mut next = self.clone();
        next.families.insert(family);
        next.name = "custom".into();
        next
    }

    /// Preset name when the set is a preset, else the family list; either
    /// form parses back to an equal set.
    pub fn spec(&self) -> String {
        for preset in [Self::baseline(), Self::monolingual(), Self::crosslingual()] {
            if *self == preset {
                return preset.name;
            }
        }
        self.describe()
    }

    /// Comma-separated family names, the form `parse` accepts back.
    pub fn describe(&self) -> String {
        self.families.iter().map(|f| f.name()).collect::<Vec<_>>().join(",")
    }
}

/// Sparse named feature values; absent names are zero.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FeatureVector {
    entries: BTreeMap<String, f64>,
}

impl FeatureVector {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_entries(entries: impl IntoIterator<Item = (String, f64)>) -> Self {
        let mut v = Self::new();
        for (k, x) in entries {
            v.set(k, x);
        }
        v
    }

    pub fn get(&self, name: &str) -> f64 {
        self.entries.get(name).copied().unwrap_or(0.0)
    }

    pub fn set(&mut self, name: impl Into<String>, value: f64) {
        debug_assert!(value.is_finite());
        let name = name.into();
        if value == 0.0 {
            self.entries.remove(&name);
        } else {
            self.entries.insert(name, value);
        }
    }

    pub fn add(&mut self, name: impl Into<String>, value: f64) {
        let name = name.into();
        let next = self.get(&name) + value;
        self.set(name, next);
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, f64)> {
        self.entries.iter().map(|(k, &v)| (k.as_str(), v))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Entries belonging to one family.
    pub fn family(&self, family: Family) -> impl Iterator<Item = (&str, f64)> {
        self.iter().filter(move |(k, _)| Family::of_feature(k) == Some(family))
    }

    /// Keep only the families in `set`, rescaling `len_tokens_norm` from a
    /// vector extracted with [`Normalizers::identity`].
    pub fn project(&self, set: &FeatureSet, normalizers: &Normalizers) -> FeatureVector {
        let mut out = FeatureVector::new();
        for (name, value) in self.iter() {
            match Family::of_feature(name) {
                Some(Family::LenTokensNorm) if set.contains(Family::LenTokensNorm) => {
                    out.set(name, value / normalizers.mean_target_tokens)
                }
                Some(f) if set.contains(f) => out.set(name, value),
                _ => {}
            }
        }
        out
    }

    /// `name<TAB>value` lines in name order.
    pub fn to_tsv(&self) -> String {
        self.iter().map(|(k, v)| format!("{k}\t{v}\n")).collect()
    }
}

/// Sentence tokens overlapping the target span.
pub fn target_token_count(instance: &Instance) -> usize {
    tokenize(&instance.sentence)
        .iter()
        .filter(|t| t.start < instance.end && t.end > instance.start)
        .count()
}

/// Characters counted by `num_complex_punct`.
pub const COMPLEX_PUNCT: [char; 12] = ['-', '–', '—', '\'', '’', '/', '(', ')', ',', ';', ':', '.'];

const DEFAULT_CONSONANTS: &str = "bcdfghjklmnpqrstvwxyzñçß";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtractOptions {
    /// Report `is_stop` as 1 when every target token is a stopword instead
    /// of the stopword fraction.
    pub binary_is_stop: bool,
    /// Trigrams with a table count below this are rare.
    pub rare_trigram_threshold: u64,
    /// Fail instead of degrading when a family's optional asset is missing.
    pub strict_resources: bool,
}

impl Default for ExtractOptions {
    fn default() -> Self {
        ExtractOptions {
            binary_is_stop: false,
            rare_trigram_threshold: 1,
            strict_resources: false,
        }
    }
}

struct TargetToken<'a> {
    text: &'a str,
    ann: &'a TokenAnnotation,
}

impl TargetToken<'_> {
    fn lower(&self) -> String {
        self.text.to_lowercase()
    }

    fn is_word(&self) -> bool {
        self.text.chars().any(char::is_alphanumeric)
    }

    fn lemma(&self) -> String {
        self.ann.lemma.clone().unwrap_or_else(|| self.lower())
    }
}

pub struct FeatureExtractor<'a> {
    pub bundle: &'a ResourceBundle,
    pub options: ExtractOptions,
}

impl<'a> FeatureExtractor<'a> {
    pub fn new(bundle: &'a ResourceBundle) -> Self {
        FeatureExtractor {
            bundle,
            options: ExtractOptions::default(),
        }
    }

    pub fn with_options(bundle: &'a ResourceBundle, options: ExtractOptions) -> Self {
        FeatureExtractor { bundle, options }
    }

    /// Requested families that will be computed without their inputs:
    /// missing optional assets, or annotation families with no sidecar.
    pub fn degraded_families(&self, set: &FeatureSet, have_annotations: bool) -> Vec<Family> {
        set.families
            .iter()
            .copied()
            .filter(|f| {
                let missing_asset = f
                    .optional_resource()
                    .is_some_and(|asset| self.bundle.degraded.iter().any(|d| d == asset));
                missing_asset || (f.needs_annotations() && !have_annotations)
            })
            .collect()
    }

    fn missing(&self, family: Family) -> Result<()> {
        if self.options.strict_resources {
            Err(Error::MissingFamilyResource {
                family: family.name().to_string(),
                resource: family.optional_resource().unwrap_or("annotations").to_string(),
            })
        } else {
            Ok(())
        }
    }

    pub fn extract(
        &self,
        instance: &Instance,
        sentence: &AnnotatedSentence,
        set: &FeatureSet,
        normalizers: &Normalizers,
    ) -> Result<FeatureVector> {
        if instance.language != self.bundle.language {
            return Err(Error::LanguageMismatch {
                instance: instance.language.to_string(),
                bundle: self.bundle.language.to_string(),
            });
        }
        debug_assert_eq!(instance.sentence, sentence.sentence);

        let targets: Vec<TargetToken> = sentence
            .tokens
            .iter()
            .zip(&sentence.annotations)
            .filter(|(t, _)| t.start < instance.end && t.end > instance.start)
            .map(|(token, ann)| TargetToken {
                text: char_slice(
                    &sentence.sentence,
                    token.start.max(instance.start),
                    token.end.min(instance.end),
                )
                .unwrap_or(""),
                ann,
            })
            .collect();
        let n_tokens = targets.len().max(1) as f64;
        let target_chars = instance.target.chars().count() as f64;
        let b = self.bundle;
        let mut v = FeatureVector::new();

        for &family in &set.families {
            let name = family.name();
            match family {
                Family::LenTokens => v.set(name, targets.len() as f64),
                Family::LenTokensNorm => v.set(name, targets.len() as f64 / normalizers.mean_target_tokens),
                Family::LenCharsNorm => v.set(name, target_chars / b.mean_word_chars),
                Family::AvgCharsPerWord => {
                    let chars: usize = targets.iter().map(|t| t.text.chars().count()).sum();
                    v.set(name, chars as f64 / n_tokens)
                }
                Family::UnigramProb => v.set(name, targets.iter().map(|t| b.unigram.logprob(t.text)).sum()),
                Family::HypernymCount => match &b.hypernym_counts {
                    Some(table) => v.set(
                        name,
                        targets
                            .iter()
                            .map(|t| table.get(&t.lemma().to_lowercase()).copied().unwrap_or(0.0))
                            .sum(),
                    ),
                    None => self.missing(family)?,
                },
                Family::NerTagCounts => {
                    for t in &targets {
                        if let Some(kind) = t.ann.ner_type() {
                            v.add(format!("{name}:{kind}"), 1.0);
                        }
                    }
                }
                Family::PosTagCounts => {
                    for t in &targets {
                        if let Some(pos) = &t.ann.pos {
                            v.add(format!("{name}:{pos}"), 1.0);
                        }
                    }
                }
                Family::IobTags => {
                    for t in &targets {
                        if let Some(iob) = t.ann.iob() {
                            v.add(format!("{name}:{iob}"), 1.0);
                        }
                    }
                }
                Family::BagOfShapes => {
                    for t in &targets {
                        v.add(format!("{name}:{}", word_shape(t.text)), 1.0);
                    }
                }
                Family::RareWordCount => match &b.rare_words {
                    Some(common) => v.set(
                        name,
                        targets.iter().filter(|t| t.is_word() && !common.contains(&t.lower())).count() as f64,
                    ),
                    None => self.missing(family)?,
                },
                Family::RareTrigramCount => {
                    let rare: HashSet<String> = targets
                        .iter()
                        .flat_map(|t| char_trigrams(t.text))
                        .filter(|tri| b.trigrams.count(tri) < self.options.rare_trigram_threshold)
                        .collect();
                    v.set(name, rare.len() as f64)
                }
                Family::IsStop => match &b.stopwords {
                    Some(stop) => {
                        let hits = targets.iter().filter(|t| stop.contains(&t.lower())).count();
                        let value = if self.options.binary_is_stop {
                            f64::from(u8::from(hits == targets.len()))
                        } else {
                            hits as f64 / n_tokens
                        };
                        v.set(name, value)
                    }
                    None => self.missing(family)?,
                },
                Family::IsNounphrase => {
                    let all = !targets.is_empty() && targets.iter().all(|t| t.ann.in_noun_phrase == Some(true));
                    v.set(name, f64::from(u8::from(all)))
                }
                Family::LemmaFeats => {
                    for (tok, ann) in sentence.tokens.iter().zip(&sentence.annotations) {
                        let lemma = ann.lemma.clone().unwrap_or_else(|| tok.text.to_lowercase());
                        v.add(format!("{name}:{lemma}"), 1.0);
                    }
                }
                Family::LenSylls => v.set(
                    name,
                    targets
                        .iter()
                        .filter(|t| t.is_word())
                        .map(|t| syllable_count(&b.hyphenation, t.text))
                        .sum::<usize>() as f64,
                ),
                Family::NumComplexPunct => v.set(
                    name,
                    instance.target.chars().filter(|c| COMPLEX_PUNCT.contains(c)).count() as f64,
                ),
                Family::CharNGramFeats => {
                    let marked: Vec<char> = std::iter::once('^')
                        .chain(instance.target.chars().flat_map(char::to_lowercase))
                        .chain(std::iter::once('$'))
                        .collect();
                    for n in 2..=3 {
                        for gram in marked.windows(n) {
                            v.add(format!("{name}:{}", gram.iter().collect::<String>()), 1.0);
                        }
                    }
                }
                Family::CharTriSum | Family::CharTriAvg => {
                    let counts: Vec<u64> = targets
                        .iter()
                        .flat_map(|t| char_trigrams(t.text))
                        .map(|tri| b.trigrams.count(&tri))
                        .collect();
                    let sum = counts.iter().sum::<u64>() as f64;
                    let value = match family {
                        Family::CharTriSum => sum,
                        _ if counts.is_empty() => 0.0,
                        _ => sum / counts.len() as f64,
                    };
                    v.set(name, value)
                }
                Family::ConsonantFreq => {
                    let lower = instance.target.chars().flat_map(char::to_lowercase);
                    let count = match &b.consonants {
                        Some(set) => lower.filter(|c| set.contains(c)).count(),
                        None => lower.filter(|c| DEFAULT_CONSONANTS.contains(*c)).count(),
                    };
                    v.set(name, count as f64)
                }
                Family::GrOrLat => match &b.affixes {
                    Some(affixes) => {
                        let hit = targets
                            .iter()
                            .filter(|t| t.is_word())
                            .any(|t| {
                                let w = t.lower();
                                affixes.iter().any(|a| a.matches(&w))
                            });
                        v.set(name, f64::from(u8::from(hit)))
                    }
                    None => self.missing(family)?,
                },
                Family::IsCapitalised => {
                    let upper = instance.target.chars().next().is_some_and(char::is_uppercase);
                    v.set(name, f64::from(u8::from(upper)))
                }
                Family::SentLength => v.set(name, sentence.tokens.len() as f64),
                Family::SentNGramFeats => {
                    let lower: Vec<String> = sentence.tokens.iter().map(|t| t.text.to_lowercase()).collect();
                    for n in 1..=3 {
                        for gram in lower.windows(n) {
                            v.add(format!("{name}:{}", gram.join(" ")), 1.0);
                        }
                    }
                }
            }
        }
        Ok(v)
    }
}
