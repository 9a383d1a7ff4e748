//! Shared-task TSV corpora: typed instances, span validation and sub-span
//! lookup.
//!
//! Offsets are character offsets over Unicode scalar values, so
//! `sentence.chars().skip(start).take(end - start)` must equal the target.

use std::collections::HashMap;
use std::fmt;
use std::io::{BufRead, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::annotate::tokenize;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Label {
    NonComplex,
    Complex,
}

impl Label {
    pub fn from_bool(complex: bool) -> Self {
        if complex {
            Label::Complex
        } else {
            Label::NonComplex
        }
    }

    pub fn is_complex(self) -> bool {
        self == Label::Complex
    }

    pub fn flipped(self) -> Self {
        match self {
            Label::Complex => Label::NonComplex,
            Label::NonComplex => Label::Complex,
        }
    }

    fn as_column(self) -> &'static str {
        match self {
            Label::Complex => "1",
            Label::NonComplex => "0",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Language {
    #[serde(rename = "EN")]
    En,
    #[serde(rename = "ES")]
    Es,
    #[serde(rename = "DE")]
    De,
    #[serde(rename = "FR")]
    Fr,
}

impl Language {
    pub const ALL: [Language; 4] = [Language::En, Language::Es, Language::De, Language::Fr];
    /// Languages that ship training data.
    pub const TRAINABLE: [Language; 3] = [Language::En, Language::Es, Language::De];

    pub fn code(self) -> &'static str {
        match self {
            Language::En => "EN",
            Language::Es => "ES",
            Language::De => "DE",
            Language::Fr => "FR",
        }
    }
}

impl fmt::Display for Language {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl FromStr for Language {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "EN" | "ENGLISH" => Ok(Language::En),
            "ES" | "SPANISH" => Ok(Language::Es),
            "DE" | "GERMAN" => Ok(Language::De),
            "FR" | "FRENCH" => Ok(Language::Fr),
            other => Err(Error::Config(format!("unknown language {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Genre {
    News,
    WikiNews,
    Wikipedia,
    None,
}

impl Genre {
    pub const ENGLISH: [Genre; 3] = [Genre::News, Genre::WikiNews, Genre::Wikipedia];

    pub fn name(self) -> &'static str {
        match self {
            Genre::News => "News",
            Genre::WikiNews => "WikiNews",
            Genre::Wikipedia => "Wikipedia",
            Genre::None => "None",
        }
    }
}

impl fmt::Display for Genre {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Genre {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "news" => Ok(Genre::News),
            "wikinews" => Ok(Genre::WikiNews),
            "wikipedia" => Ok(Genre::Wikipedia),
            "none" | "" => Ok(Genre::None),
            other => Err(Error::Config(format!("unknown genre {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Dev,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Dev, Split::Test];

    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Dev => "dev",
            Split::Test => "test",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "train" => Ok(Split::Train),
            "dev" => Ok(Split::Dev),
            "test" => Ok(Split::Test),
            other => Err(Error::Config(format!("unknown split {other:?}"))),
        }
    }
}

/// One annotated target span.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Instance {
    pub id: String,
    pub sentence: String,
    pub start: usize,
    pub end: usize,
    pub target: String,
    pub label: Label,
    pub language: Language,
    pub genre: Genre,
}

impl Instance {
    /// Number of tokens the default tokenizer finds in the target.
    pub fn target_token_count(&self) -> usize {
        tokenize(&self.target).len()
    }

    pub fn contains_strictly(&self, other: &Instance) -> bool {
        self.start <= other.start
            && other.end <= self.end
            && (self.start, self.end) != (other.start, other.end)
    }
}

/// Multi-word expression: the target tokenizes into two or more tokens.
pub fn is_mwe(instance: &Instance) -> bool {
    instance.target_token_count() >= 2
}

/// Substring of `s` between character offsets, or `None` when out of range.
pub fn char_slice(s: &str, start: usize, end: usize) -> Option<&str> {
    if start > end {
        return None;
    }
    let mut indices = s.char_indices().map(|(i, _)| i).chain(std::iter::once(s.len()));
    let from = indices.nth(start)?;
    let to = if end == start {
        from
    } else {
        indices.nth(end - start - 1)?
    };
    Some(&s[from..to])
}

/// Column layout of a shared-task TSV file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnMap {
    pub id: usize,
    pub sentence: usize,
    pub start: usize,
    pub end: usize,
    pub target: usize,
    pub label: usize,
    pub columns: usize,
    /// Skip the first line of every file.
    pub has_header: bool,
}

impl Default for ColumnMap {
    /// The Second CWI Shared Task layout: HIT id, sentence, start, end,
    /// target, four annotator counts, binary label, probabilistic label.
    fn default() -> Self {
        ColumnMap {
            id: 0,
            sentence: 1,
            start: 2,
            end: 3,
            target: 4,
            label: 9,
            columns: 11,
            has_header: false,
        }
    }
}

impl ColumnMap {
    pub fn validate(&self) -> Result<()> {
        let idx = [self.id, self.sentence, self.start, self.end, self.target, self.label];
        for (i, a) in idx.iter().enumerate() {
            if *a >= self.columns {
                return Err(Error::Config(format!(
                    "column index {a} out of range for {} columns",
                    self.columns
                )));
            }
            if idx[i + 1..].contains(a) {
                return Err(Error::Config(format!("column index {a} used twice")));
            }
        }
        Ok(())
    }
}

/// Instances from one file, in file order.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub instances: Vec<Instance>,
    pub language: Language,
    pub genre: Genre,
    pub split: Split,
    by_sentence: HashMap<String, Vec<usize>>,
}

impl PartialEq for Dataset {
    fn eq(&self, other: &Self) -> bool {
        self.instances == other.instances
            && self.language == other.language
            && self.genre == other.genre
            && self.split == other.split
    }
}

impl Dataset {
    pub fn new(instances: Vec<Instance>, language: Language, genre: Genre, split: Split) -> Self {
        let mut by_sentence: HashMap<String, Vec<usize>> = HashMap::new();
        for (i, inst) in instances.iter().enumerate() {
            by_sentence.entry(inst.sentence.clone()).or_default().push(i);
        }
        Dataset {
            instances,
            language,
            genre,
            split,
            by_sentence,
        }
    }

    pub fn len(&self) -> usize {
        self.instances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instances.is_empty()
    }

    /// Other instances of the same sentence whose span lies strictly inside
    /// the span of instance `index`, in corpus order.
    pub fn subwords_of(&self, index: usize) -> Vec<&Instance> {
        let inst = &self.instances[index];
        self.by_sentence
            .get(&inst.sentence)
            .into_iter()
            .flatten()
            .filter(|&&j| j != index)
            .map(|&j| &self.instances[j])
            .filter(|other| inst.contains_strictly(other))
            .collect()
    }

    pub fn sentences(&self) -> impl Iterator<Item = &str> {
        self.by_sentence.keys().map(String::as_str)
    }
}

pub fn parse_dataset<R: BufRead>(
    reader: R,
    columns: &ColumnMap,
    language: Language,
    genre: Genre,
    split: Split,
) -> Result<Dataset> {
    columns.validate()?;
    let mut instances = Vec::new();
    for (n, line) in reader.lines().enumerate() {
        let line_no = n + 1;
        let line = line.map_err(|e| Error::Malformed {
            line: line_no,
            message: e.to_string(),
        })?;
        if n == 0 && columns.has_header {
            continue;
        }
        let line = line.strip_suffix('\r').unwrap_or(&line);
        if line.trim().is_empty() {
            continue;
        }
        instances.push(parse_line(line, line_no, columns, language, genre)?);
    }
    Ok(Dataset::new(instances, language, genre, split))
}

pub fn load_dataset(
    path: &Path,
    columns: &ColumnMap,
    language: Language,
    genre: Genre,
    split: Split,
) -> Result<Dataset> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_dataset(std::io::BufReader::new(file), columns, language, genre, split).map_err(|e| match e {
        Error::Malformed { line, message } => Error::Malformed {
            line,
            message: format!("{}: {message}", path.display()),
        },
        other => other,
    })
}

fn parse_line(
    line: &str,
    line_no: usize,
    columns: &ColumnMap,
    language: Language,
    genre: Genre,
) -> Result<Instance> {
    let fields: Vec<&str> = line.split('\t').collect();
    if fields.len() < columns.columns {
        return Err(Error::Malformed {
            line: line_no,
            message: format!("expected {} columns, found {}", columns.columns, fields.len()),
        });
    }
    let offset = |col: usize, what: &str| -> Result<usize> {
        fields[col].trim().parse().map_err(|_| Error::Malformed {
            line: line_no,
            message: format!("{what} offset {:?} is not a non-negative integer", fields[col]),
        })
    };
    let start = offset(columns.start, "start")?;
    let end = offset(columns.end, "end")?;
    let label = match fields[columns.label].trim() {
        "0" => Label::NonComplex,
        "1" => Label::Complex,
        other => {
            return Err(Error::Malformed {
                line: line_no,
                message: format!("binary label {other:?} is not 0 or 1"),
            })
        }
    };
    let inst = Instance {
        id: fields[columns.id].to_string(),
        sentence: fields[columns.sentence].to_string(),
        start,
        end,
        target: fields[columns.target].to_string(),
        label,
        language,
        genre,
    };
    let found = char_slice(&inst.sentence, start, end);
    let valid = start < end && found == Some(inst.target.as_str()) && !inst.target.trim().is_empty();
    if !valid {
        return Err(Error::SpanMismatch {
            line: line_no,
            id: inst.id,
            start,
            end,
            target: inst.target,
            found: found.unwrap_or("<out of range>").to_string(),
        });
    }
    Ok(inst)
}

/// Canonical TSV form: mapped columns filled, all others left empty.
pub fn write_dataset<W: Write>(dataset: &Dataset, columns: &ColumnMap, mut out: W) -> Result<()> {
    let io = |e| Error::io("<output>", e);
    if columns.has_header {
        let header: Vec<String> = (0..columns.columns).map(|i| format!("col{i}")).collect();
        writeln!(out, "{}", header.join("\t")).map_err(io)?;
    }
    let mut row = vec![String::new(); columns.columns];
    for inst in &dataset.instances {
        row.iter_mut().for_each(String::clear);
        row[columns.id] = inst.id.clone();
        row[columns.sentence] = inst.sentence.clone();
        row[columns.start] = inst.start.to_string();
        row[columns.end] = inst.end.to_string();
        row[columns.target] = inst.target.clone();
        row[columns.label] = inst.label.as_column().to_string();
        writeln!(out, "{}", row.join("\t")).map_err(io)?;
    }
    Ok(())
}
