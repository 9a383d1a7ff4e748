//! Liang-style pattern hyphenation, used only for syllable counting.
//!
//! Reads both TeX pattern files (`\patterns{...}`, optional
//! `\hyphenation{...}` exceptions) and the hunspell/LibreOffice `hyph_*.dic`
//! flavour (first line names the encoding, directives are ignored).

use std::collections::HashMap;
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct HyphenationDict {
    /// Letter sequence → inter-letter values (one more entry than letters).
    patterns: HashMap<Vec<char>, Vec<u8>>,
    exceptions: HashMap<String, Vec<usize>>,
    max_len: usize,
    pub left_min: usize,
    pub right_min: usize,
}

const DIRECTIVES: [&str; 5] = [
    "LEFTHYPHENMIN",
    "RIGHTHYPHENMIN",
    "COMPOUNDLEFTHYPHENMIN",
    "COMPOUNDRIGHTHYPHENMIN",
    "NEXTLEVEL",
];

fn decode_hex_escapes(pattern: &str) -> String {
    let mut out = String::with_capacity(pattern.len());
    let mut rest = pattern;
    while let Some(pos) = rest.find("^^") {
        out.push_str(&rest[..pos]);
        let hex = rest.get(pos + 2..pos + 4);
        match hex.and_then(|h| u8::from_str_radix(h, 16).ok()) {
            Some(byte) => {
                out.push(char::from(byte));
                rest = &rest[pos + 4..];
            }
            None => {
                out.push_str("^^");
                rest = &rest[pos + 2..];
            }
        }
    }
    out.push_str(rest);
    out
}

/// Split `a2ch4` into letters `ach` and values `[0, 2, 0, 4]`.
fn parse_pattern(pattern: &str) -> (Vec<char>, Vec<u8>) {
    let mut letters = Vec::new();
    let mut values = vec![0u8];
    for c in pattern.chars() {
        if let Some(d) = c.to_digit(10) {
            *values.last_mut().unwrap() = d as u8;
        } else {
            letters.extend(c.to_lowercase());
            values.push(0);
        }
    }
    (letters, values)
}

impl HyphenationDict {
    pub fn from_patterns<'a>(patterns: impl IntoIterator<Item = &'a str>) -> Result<Self> {
        let mut dict = HyphenationDict {
            patterns: HashMap::new(),
            exceptions: HashMap::new(),
            max_len: 0,
            left_min: 2,
            right_min: 2,
        };
        for p in patterns {
            dict.insert_pattern(p);
        }
        if dict.patterns.is_empty() {
            return Err(Error::Resource("hyphenation pattern set is empty".into()));
        }
        Ok(dict)
    }

    fn insert_pattern(&mut self, raw: &str) {
        let raw = raw.trim();
        // nonstandard alternatives ("c1k/k=k,1,1") keep only their break values
        let raw = raw.split('/').next().unwrap_or(raw);
        if raw.is_empty() {
            return;
        }
        let (letters, values) = parse_pattern(&decode_hex_escapes(raw));
        if letters.is_empty() || values.iter().all(|&v| v == 0) {
            return;
        }
        self.max_len = self.max_len.max(letters.len());
        self.patterns.insert(letters, values);
    }

    fn insert_exception(&mut self, raw: &str) {
        let word: String = raw.chars().filter(|&c| c != '-').collect::<String>().to_lowercase();
        let mut breaks = Vec::new();
        let mut pos = 0;
        for c in raw.chars() {
            if c == '-' {
                breaks.push(pos);
            } else {
                pos += 1;
            }
        }
        if !word.is_empty() {
            self.exceptions.insert(word, breaks);
        }
    }

    pub fn parse_bytes(bytes: &[u8]) -> Result<Self> {
        let first_line_end = bytes.iter().position(|&b| b == b'\n').unwrap_or(bytes.len());
        let first = String::from_utf8_lossy(&bytes[..first_line_end]).trim().to_ascii_uppercase();
        let text: String = if first.starts_with("ISO8859") || first.starts_with("ISO-8859") {
            bytes.iter().map(|&b| char::from(b)).collect()
        } else {
            String::from_utf8(bytes.to_vec())
                .map_err(|e| Error::Resource(format!("hyphenation file is not UTF-8: {e}")))?
        };
        if text.contains("\\patterns") {
            Self::parse_tex(&text)
        } else {
            Self::parse_dic(&text)
        }
    }

    fn parse_dic(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        lines.next(); // encoding
        let mut patterns = Vec::new();
        for line in lines {
            let line = line.trim();
            if line.is_empty() || line.starts_with('%') || line.starts_with('#') {
                continue;
            }
            if DIRECTIVES.iter().any(|d| line.starts_with(d)) {
                continue;
            }
            patterns.push(line);
        }
        Self::from_patterns(patterns)
    }

    fn parse_tex(text: &str) -> Result<Self> {
        let uncommented: String = text
            .lines()
            .map(|l| l.split('%').next().unwrap_or(""))
            .collect::<Vec<_>>()
            .join("\n");
        let group = |name: &str| -> Vec<String> {
            let mut out = Vec::new();
            let mut rest = uncommented.as_str();
            while let Some(pos) = rest.find(name) {
                let after = &rest[pos + name.len()..];
                let Some(open) = after.find('{') else { break };
                let Some(close) = after[open..].find('}') else { break };
                out.extend(after[open + 1..open + close].split_whitespace().map(str::to_string));
                rest = &after[open + close..];
            }
            out
        };
        let patterns = group("\\patterns");
        let mut dict = Self::from_patterns(patterns.iter().map(String::as_str))?;
        for ex in group("\\hyphenation") {
            dict.insert_exception(&ex);
        }
        Ok(dict)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::parse_bytes(&bytes)
    }

    /// Break positions inside `word`: `p` means a break before the `p`-th
    /// character. Positions closer than `left_min`/`right_min` to either end
    /// are dropped.
    pub fn positions(&self, word: &str) -> Vec<usize> {
        let lower: Vec<char> = word.chars().flat_map(char::to_lowercase).collect();
        let n = lower.len();
        let lower_word: String = lower.iter().collect();
        let raw: Vec<usize> = if let Some(ex) = self.exceptions.get(&lower_word) {
            ex.clone()
        } else {
            let mut dotted = Vec::with_capacity(n + 2);
            dotted.push('.');
            dotted.extend_from_slice(&lower);
            dotted.push('.');
            let mut values = vec![0u8; dotted.len() + 1];
            for i in 0..dotted.len() {
                let stop = (i + self.max_len).min(dotted.len());
                for j in i + 1..=stop {
                    if let Some(pv) = self.patterns.get(&dotted[i..j]) {
                        for (k, &v) in pv.iter().enumerate() {
                            let slot = &mut values[i + k];
                            *slot = (*slot).max(v);
                        }
                    }
                }
            }
            // value at dotted index i sits before dotted[i], i.e. before word[i - 1]
            (1..values.len())
                .filter(|&i| values[i] % 2 == 1)
                .map(|i| i - 1)
                .collect()
        };
        raw.into_iter()
            .filter(|&p| p >= self.left_min && p + self.right_min <= n)
            .collect()
    }
}

fn is_word_char(c: char) -> bool {
    c.is_alphabetic() || c == '\'' || c == '\u{2019}'
}

/// One plus the number of break points, summed over the alphabetic segments
/// of `word` (so `a-b` counts as `a` plus `b`). Tokens with no letters count
/// as one syllable.
pub fn syllable_count(hyph: &HyphenationDict, word: &str) -> usize {
    let total: usize = word
        .split(|c: char| !is_word_char(c))
        .filter(|seg| seg.chars().any(char::is_alphabetic))
        .map(|seg| 1 + hyph.positions(seg).len())
        .sum();
    total.max(1)
}

#[cfg(test)]
mod tests {
    use super::*;

    // The classic examples from Liang's thesis patterns.
    fn tiny() -> HyphenationDict {
        HyphenationDict::from_patterns(["hy3ph", "he2n", "hena4", "hen5at", "1na", "n2at", "1tio", "2io", "o2n"])
            .unwrap()
    }

    #[test]
    fn pattern_parsing() {
        let (letters, values) = parse_pattern("a2ch4");
        assert_eq!(letters, ['a', 'c', 'h']);
        assert_eq!(values, [0, 2, 0, 4]);
        let (letters, values) = parse_pattern(".ad4der");
        assert_eq!(letters.len(), 6);
        assert_eq!(values, [0, 0, 0, 4, 0, 0, 0]);
    }

    #[test]
    fn hyphenation_example() {
        assert_eq!(tiny().positions("hyphenation"), vec![2, 6]);
        assert_eq!(syllable_count(&tiny(), "hyphenation"), 3);
    }

    #[test]
    fn margins_suppress_edge_breaks() {
        let d = HyphenationDict::from_patterns(["1b"]).unwrap();
        assert_eq!(d.positions("ababab"), vec![3]);
        let mut wide = d.clone();
        wide.left_min = 1;
        wide.right_min = 1;
        assert_eq!(wide.positions("ababab"), vec![1, 3, 5]);
    }

    #[test]
    fn non_alphabetic_counts_one() {
        assert_eq!(syllable_count(&tiny(), "2016"), 1);
        assert_eq!(syllable_count(&tiny(), "..."), 1);
        assert_eq!(syllable_count(&tiny(), "a"), 1);
    }

    #[test]
    fn hyphenated_compound_adds_halves() {
        let d = tiny();
        let whole = syllable_count(&d, "hyphenation-hyphenation");
        assert_eq!(whole, 2 * syllable_count(&d, "hyphenation"));
    }

    #[test]
    fn tex_format_with_exceptions() {
        let tex = "% comment\n\\patterns{ % inline\n1na n2at\n}\n\\hyphenation{ta-ble}\n";
        let d = HyphenationDict::parse_bytes(tex.as_bytes()).unwrap();
        assert_eq!(d.positions("table"), vec![2]);
        assert_eq!(d.positions("banana"), vec![2, 4]);
    }

    #[test]
    fn dic_format_latin1() {
        let mut bytes = b"ISO8859-1\nLEFTHYPHENMIN 2\n1\xe4\n".to_vec();
        bytes.extend_from_slice(b"%comment\n");
        let d = HyphenationDict::parse_bytes(&bytes).unwrap();
        assert_eq!(d.positions("bbäbb"), vec![2]);
    }

    #[test]
    fn empty_pattern_set_is_rejected() {
        assert!(HyphenationDict::parse_bytes(b"UTF-8\nLEFTHYPHENMIN 2\n").is_err());
    }
}
