//! Tokenization, word shapes, and pre-computed token annotations.
//!
//! Linguistic annotations (lemma, POS, NER/IOB, noun-phrase membership) are
//! read from a sidecar file instead of running a tagger. Sentences missing
//! from the sidecar get all-absent annotations.
//!
//! Sidecar layout, one block per sentence, blocks separated by blank lines:
//!
//! ```text
//! # text = Both China and the Philippines flexed their muscles on Wednesday.
//! Both	both	DET	O	1
//! China	China	PROPN	B-GPE	1
//! ...
//! ```
//!
//! Columns are `token, lemma, pos, ner_iob, np_flag`; `_` marks an absent
//! value and `np_flag` is `1` or `0`.

use std::collections::{HashMap, HashSet};
use std::io::BufRead;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const SIDECAR_HEADER: &str = "# text = ";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Token {
    pub text: String,
    /// Character offsets into the sentence.
    pub start: usize,
    pub end: usize,
}

impl Token {
    pub fn is_word(&self) -> bool {
        self.text.chars().any(char::is_alphanumeric)
    }
}

fn is_edge_punct(c: char) -> bool {
    !c.is_alphanumeric()
}

/// Split on whitespace, then peel leading and trailing punctuation off each
/// chunk as single-character tokens. Hyphens and apostrophes between
/// alphanumerics stay inside the word.
pub fn tokenize(sentence: &str) -> Vec<Token> {
    let chars: Vec<char> = sentence.chars().collect();
    let mut tokens = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        if chars[i].is_whitespace() {
            i += 1;
            continue;
        }
        let chunk_start = i;
        while i < chars.len() && !chars[i].is_whitespace() {
            i += 1;
        }
        let chunk_end = i;

        let mut lo = chunk_start;
        while lo < chunk_end && is_edge_punct(chars[lo]) {
            lo += 1;
        }
        let mut hi = chunk_end;
        while hi > lo && is_edge_punct(chars[hi - 1]) {
            hi -= 1;
        }
        let single = |k: usize| Token {
            text: chars[k].to_string(),
            start: k,
            end: k + 1,
        };
        tokens.extend((chunk_start..lo).map(single));
        if lo < hi {
            tokens.push(Token {
                text: chars[lo..hi].iter().collect(),
                start: lo,
                end: hi,
            });
        }
        tokens.extend((hi.max(lo)..chunk_end).map(single));
    }
    tokens
}

const SHAPE_RUN_LIMIT: usize = 4;

/// Map letters to `X`/`x`, digits to `d`, keep everything else, and cap runs
/// of one symbol at four.
pub fn word_shape(token: &str) -> String {
    let mut shape = String::with_capacity(token.len());
    let mut last = None;
    let mut run = 0;
    for c in token.chars() {
        let s = if c.is_uppercase() {
            'X'
        } else if c.is_lowercase() {
            'x'
        } else if c.is_numeric() {
            'd'
        } else {
            c
        };
        if Some(s) == last {
            run += 1;
        } else {
            last = Some(s);
            run = 1;
        }
        if run <= SHAPE_RUN_LIMIT {
            shape.push(s);
        }
    }
    shape
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenAnnotation {
    pub pos: Option<String>,
    pub ner_iob: Option<String>,
    pub lemma: Option<String>,
    pub in_noun_phrase: Option<bool>,
}

impl TokenAnnotation {
    /// Entity type of a `B-TYPE`/`I-TYPE` tag; `None` outside entities.
    pub fn ner_type(&self) -> Option<&str> {
        let tag = self.ner_iob.as_deref()?;
        match tag.split_once('-') {
            Some((_, kind)) if !kind.is_empty() => Some(kind),
            _ if tag != "O" => Some(tag),
            _ => None,
        }
    }

    /// The `B`, `I` or `O` part of the tag.
    pub fn iob(&self) -> Option<&str> {
        let tag = self.ner_iob.as_deref()?;
        Some(tag.split_once('-').map_or(tag, |(iob, _)| iob))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotatedSentence {
    pub sentence: String,
    pub tokens: Vec<Token>,
    pub annotations: Vec<TokenAnnotation>,
    pub shapes: Vec<String>,
    /// False when the null annotator filled in the annotations.
    pub from_sidecar: bool,
}

/// Declared tag inventory; tags outside it are kept but warned about.
#[derive(Debug, Clone, Default)]
pub struct Tagset {
    tags: HashSet<String>,
}

impl Tagset {
    pub fn parse<R: BufRead>(reader: R) -> Result<Self> {
        let mut tags = HashSet::new();
        for line in reader.lines() {
            let line = line.map_err(|e| Error::io("<tagset>", e))?;
            let tag = line.trim();
            if !tag.is_empty() {
                tags.insert(tag.to_string());
            }
        }
        Ok(Tagset { tags })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::parse(std::io::BufReader::new(file))
    }

    pub fn contains(&self, tag: &str) -> bool {
        self.tags.contains(tag)
    }
}

/// Sentence-keyed token annotations loaded from a sidecar file.
#[derive(Debug, Clone, Default)]
pub struct SidecarTable {
    entries: HashMap<String, Vec<TokenAnnotation>>,
    pub warnings: Vec<String>,
}

impl SidecarTable {
    pub fn get(&self, sentence: &str) -> Option<&[TokenAnnotation]> {
        self.entries.get(sentence).map(Vec::as_slice)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

fn optional(field: &str) -> Option<String> {
    match field.trim() {
        "" | "_" => None,
        s => Some(s.to_string()),
    }
}

pub fn load_annotation_sidecar<R: BufRead>(reader: R, tagset: Option<&Tagset>) -> Result<SidecarTable> {
    let mut table = SidecarTable::default();
    let mut current: Option<(String, Vec<TokenAnnotation>)> = None;

    let finish = |table: &mut SidecarTable, block: Option<(String, Vec<TokenAnnotation>)>| -> Result<()> {
        if let Some((sentence, anns)) = block {
            let expected = tokenize(&sentence).len();
            if expected != anns.len() {
                return Err(Error::SidecarTokenCount {
                    sentence,
                    expected,
                    found: anns.len(),
                });
            }
            table.entries.insert(sentence, anns);
        }
        Ok(())
    };

    for (n, line) in reader.lines().enumerate() {
        let line_no = n + 1;
        let line = line.map_err(|e| Error::Sidecar {
            line: line_no,
            message: e.to_string(),
        })?;
        let line = line.strip_suffix('\r').unwrap_or(&line);
        if line.trim().is_empty() {
            finish(&mut table, current.take())?;
            continue;
        }
        if let Some(sentence) = line.strip_prefix(SIDECAR_HEADER) {
            finish(&mut table, current.take())?;
            current = Some((sentence.to_string(), Vec::new()));
            continue;
        }
        let Some((_, anns)) = current.as_mut() else {
            return Err(Error::Sidecar {
                line: line_no,
                message: "token line before any sentence header".into(),
            });
        };
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 5 {
            return Err(Error::Sidecar {
                line: line_no,
                message: format!("expected 5 tab-separated fields, found {}", fields.len()),
            });
        }
        let in_noun_phrase = match fields[4].trim() {
            "1" => Some(true),
            "0" => Some(false),
            "_" | "" => None,
            other => {
                return Err(Error::Sidecar {
                    line: line_no,
                    message: format!("noun-phrase flag {other:?} is not 0, 1 or _"),
                })
            }
        };
        let ann = TokenAnnotation {
            lemma: optional(fields[1]),
            pos: optional(fields[2]),
            ner_iob: optional(fields[3]),
            in_noun_phrase,
        };
        if let Some(tags) = tagset {
            let checked = ann.pos.as_deref().into_iter().chain(ann.ner_type());
            for tag in checked {
                if !tags.contains(tag) {
                    table
                        .warnings
                        .push(format!("sidecar line {line_no}: tag {tag:?} not in tagset"));
                }
            }
        }
        anns.push(ann);
    }
    finish(&mut table, current.take())?;
    Ok(table)
}

pub fn load_sidecar_file(path: &Path, tagset: Option<&Tagset>) -> Result<SidecarTable> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    load_annotation_sidecar(std::io::BufReader::new(file), tagset)
}

pub fn annotate(sentence: &str, sidecar: Option<&SidecarTable>) -> AnnotatedSentence {
    let tokens = tokenize(sentence);
    let shapes = tokens.iter().map(|t| word_shape(&t.text)).collect();
    let found = sidecar.and_then(|table| table.get(sentence));
    let annotations = match found {
        Some(anns) => anns.to_vec(),
        None => vec![TokenAnnotation::default(); tokens.len()],
    };
    AnnotatedSentence {
        sentence: sentence.to_string(),
        tokens,
        annotations,
        shapes,
        from_sidecar: found.is_some(),
    }
}
