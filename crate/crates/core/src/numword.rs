//! English number words.
//!
//! Conversion between non-negative integers below one billion and their
//! word form ("forty eight"), and a lexer that finds number spans (digits or
//! words) in free text.
//!
//! Word style is American short scale, lowercase, single spaces, no hyphens
//! and no "and": `123` is "one hundred twenty three". Parsing is a little
//! more lenient than printing: case and hyphens are ignored.

use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::ops::Range;

use thiserror::Error;

/// Exclusive upper bound of representable values (nine digits).
pub const LIMIT: u64 = 1_000_000_000;

const UNITS: [&str; 10] = ["zero", "one", "two", "three", "four", "five", "six", "seven", "eight", "nine"];
const TEENS: [&str; 10] =
    ["ten", "eleven", "twelve", "thirteen", "fourteen", "fifteen", "sixteen", "seventeen", "eighteen", "nineteen"];
const TENS: [&str; 10] = ["", "", "twenty", "thirty", "forty", "fifty", "sixty", "seventy", "eighty", "ninety"];

/// Longest word phrase `int_to_words` can produce.
const MAX_PHRASE_WORDS: usize = 14;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum NumWordError {
    #[error("{0} is out of range (must be below 1000000000)")]
    OutOfRange(u64),
    #[error("unknown number word `{0}`")]
    UnknownWord(String),
    #[error("malformed number phrase `{0}`")]
    Malformed(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Rendering {
    Digits,
    Words,
}

impl Rendering {
    pub const ALL: [Rendering; 2] = [Rendering::Digits, Rendering::Words];

    pub fn as_str(self) -> &'static str {
        match self {
            Rendering::Digits => "digits",
            Rendering::Words => "words",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "digits" => Some(Rendering::Digits),
            "words" => Some(Rendering::Words),
            _ => None,
        }
    }

    /// Render `n` in this style.
    pub fn render(self, n: u64) -> Result<String, NumWordError> {
        match self {
            Rendering::Digits => Ok(n.to_string()),
            Rendering::Words => int_to_words(n),
        }
    }
}

/// A number found in text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NumberToken {
    pub value: u64,
    /// Byte range of the number in the source text.
    pub span: Range<usize>,
    pub surface: String,
    pub rendering: Rendering,
}

/// Vocabulary used when reading numbers.
///
/// `synonyms` are fixed phrases with a value of their own ("a dozen"); they
/// do not combine with other number words.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Lexicon {
    pub words: bool,
    pub synonyms: Vec<(Vec<String>, u64)>,
}

impl Default for Lexicon {
    fn default() -> Self {
        Lexicon { words: true, synonyms: alloc::vec![(alloc::vec!["a".to_string(), "dozen".to_string()], 12)] }
    }
}

impl Lexicon {
    /// A lexicon that only understands decimal digits.
    pub fn digits_only() -> Self {
        Lexicon { words: false, synonyms: Vec::new() }
    }

    pub fn with_synonym(mut self, phrase: &str, value: u64) -> Self {
        let words = phrase.split_whitespace().map(|w| w.to_lowercase()).collect();
        self.synonyms.push((words, value));
        self
    }

    pub fn words_to_int(&self, s: &str) -> Result<u64, NumWordError> {
        let words = split_words(s);
        if words.is_empty() {
            return Err(NumWordError::Malformed(s.to_string()));
        }
        let refs: Vec<&str> = words.iter().map(String::as_str).collect();
        self.parse_words(&refs).ok_or_else(|| match refs.iter().find(|w| !self.is_number_word(w)) {
            Some(w) => NumWordError::UnknownWord((*w).to_string()),
            None => NumWordError::Malformed(s.to_string()),
        })
    }

    /// Value of the whole word sequence, if it is exactly one number.
    pub fn parse_words(&self, words: &[&str]) -> Option<u64> {
        if let Some((_, v)) = self
            .synonyms
            .iter()
            .find(|(phrase, _)| phrase.len() == words.len() && phrase.iter().zip(words).all(|(a, b)| a == b))
        {
            return Some(*v);
        }
        if !self.words {
            return None;
        }
        parse_cardinal(words)
    }

    pub fn is_number_word(&self, w: &str) -> bool {
        (self.words && cardinal_word(w)) || self.synonyms.iter().any(|(p, _)| p.iter().any(|x| x == w))
    }

    /// Longest prefix of `words` that reads as a single number.
    ///
    /// Returns the value and how many words it covers.
    pub fn longest_number(&self, words: &[&str]) -> Option<(u64, usize)> {
        let mut best = None;
        for (phrase, v) in &self.synonyms {
            if words.len() >= phrase.len()
                && phrase.iter().zip(words).all(|(a, b)| a == b)
                && best.is_none_or(|(_, len)| phrase.len() > len)
            {
                best = Some((*v, phrase.len()));
            }
        }
        if self.words {
            let run = words.iter().take(MAX_PHRASE_WORDS).take_while(|w| cardinal_word(w)).count();
            for len in (1..=run).rev() {
                if best.is_some_and(|(_, b)| b >= len) {
                    break;
                }
                if let Some(v) = parse_cardinal(&words[..len]) {
                    best = Some((v, len));
                    break;
                }
            }
        }
        best
    }

    pub fn lex_numbers(&self, text: &str) -> Vec<NumberToken> {
        let pieces = pieces(text);
        let mut out = Vec::new();
        let mut i = 0;
        while i < pieces.len() {
            let (kind, ref span) = pieces[i];
            match kind {
                PieceKind::Digits => {
                    let s = &text[span.clone()];
                    if let Some(value) = canonical_digits(s) {
                        out.push(NumberToken {
                            value,
                            span: span.clone(),
                            surface: s.to_string(),
                            rendering: Rendering::Digits,
                        });
                    }
                    i += 1;
                }
                PieceKind::Word => {
                    // A word run is interrupted by anything that is not a word.
                    let run_end =
                        pieces[i..].iter().position(|(k, _)| *k != PieceKind::Word).map_or(pieces.len(), |p| i + p);
                    let lowered: Vec<String> =
                        pieces[i..run_end].iter().map(|(_, r)| text[r.clone()].to_lowercase()).collect();
                    let refs: Vec<&str> = lowered.iter().map(String::as_str).collect();
                    match self.longest_number(&refs) {
                        Some((value, len)) => {
                            let span = pieces[i].1.start..pieces[i + len - 1].1.end;
                            out.push(NumberToken {
                                value,
                                surface: text[span.clone()].to_string(),
                                span,
                                rendering: Rendering::Words,
                            });
                            i += len;
                        }
                        None => i += 1,
                    }
                }
                PieceKind::Other => i += 1,
            }
        }
        out
    }
}

/// Lowercase English words for `n`, e.g. `48` → "forty eight".
pub fn int_to_words(n: u64) -> Result<String, NumWordError> {
    if n >= LIMIT {
        return Err(NumWordError::OutOfRange(n));
    }
    if n == 0 {
        return Ok(UNITS[0].to_string());
    }
    let mut parts: Vec<&str> = Vec::new();
    let groups = [(n / 1_000_000, Some("million")), ((n / 1000) % 1000, Some("thousand")), (n % 1000, None)];
    for (group, scale) in groups {
        if group == 0 {
            continue;
        }
        below_thousand(group, &mut parts);
        if let Some(s) = scale {
            parts.push(s);
        }
    }
    Ok(parts.join(" "))
}

fn below_thousand(n: u64, parts: &mut Vec<&'static str>) {
    let (h, rest) = (n / 100, n % 100);
    if h > 0 {
        parts.push(UNITS[h as usize]);
        parts.push("hundred");
    }
    match rest {
        0 => {}
        1..=9 => parts.push(UNITS[rest as usize]),
        10..=19 => parts.push(TEENS[(rest - 10) as usize]),
        _ => {
            parts.push(TENS[(rest / 10) as usize]);
            if rest % 10 != 0 {
                parts.push(UNITS[(rest % 10) as usize]);
            }
        }
    }
}

/// Parse with the default lexicon ("a dozen" included).
pub fn words_to_int(s: &str) -> Result<u64, NumWordError> {
    Lexicon::default().words_to_int(s)
}

/// Number spans in `text`, using the default lexicon.
pub fn lex_numbers(text: &str) -> Vec<NumberToken> {
    Lexicon::default().lex_numbers(text)
}

fn cardinal_word(w: &str) -> bool {
    UNITS.contains(&w)
        || TEENS.contains(&w)
        || TENS[2..].contains(&w)
        || matches!(w, "hundred" | "thousand" | "million")
}

fn unit_value(w: &str) -> Option<u64> {
    UNITS[1..].iter().position(|u| *u == w).map(|p| p as u64 + 1)
}

// Parses `[unit hundred] [tens [unit] | teen | unit]`, at least one part.
fn parse_triple(words: &[&str], mut i: usize) -> Option<(u64, usize)> {
    let start = i;
    let mut value = 0;
    if let (Some(u), Some(&"hundred")) = (words.get(i).and_then(|w| unit_value(w)), words.get(i + 1)) {
        value = u * 100;
        i += 2;
    }
    if let Some(w) = words.get(i) {
        if let Some(t) = TENS[2..].iter().position(|x| x == w) {
            value += (t as u64 + 2) * 10;
            i += 1;
            if let Some(u) = words.get(i).and_then(|w| unit_value(w)) {
                value += u;
                i += 1;
            }
        } else if let Some(t) = TEENS.iter().position(|x| x == w) {
            value += 10 + t as u64;
            i += 1;
        } else if let Some(u) = unit_value(w) {
            value += u;
            i += 1;
        }
    }
    (i > start).then_some((value, i))
}

fn parse_cardinal(words: &[&str]) -> Option<u64> {
    if words == ["zero"] {
        return Some(0);
    }
    let mut i = 0;
    let mut total = 0;
    let mut last_scale = u64::MAX;
    while i < words.len() {
        let (value, next) = parse_triple(words, i)?;
        let scale = match words.get(next) {
            Some(&"million") => 1_000_000,
            Some(&"thousand") => 1000,
            Some(_) => return None,
            None => 1,
        };
        if scale >= last_scale {
            return None;
        }
        last_scale = scale;
        total += value * scale;
        i = if scale == 1 { next } else { next + 1 };
    }
    (i > 0).then_some(total)
}

fn canonical_digits(s: &str) -> Option<u64> {
    if s.len() > 9 || (s.len() > 1 && s.starts_with('0')) {
        return None;
    }
    s.parse().ok()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum PieceKind {
    Word,
    Digits,
    Other,
}

// Splits text into words (letters, with internal hyphens/apostrophes treated
// as separators), digit runs, and single other characters.
fn pieces(text: &str) -> Vec<(PieceKind, Range<usize>)> {
    let mut out = Vec::new();
    let mut chars = text.char_indices().peekable();
    while let Some((start, c)) = chars.next() {
        let kind = if c.is_alphabetic() {
            PieceKind::Word
        } else if c.is_ascii_digit() {
            PieceKind::Digits
        } else {
            if !c.is_whitespace() {
                out.push((PieceKind::Other, start..start + c.len_utf8()));
            }
            continue;
        };
        let mut end = start + c.len_utf8();
        while let Some(&(i, d)) = chars.peek() {
            let same = match kind {
                PieceKind::Word => d.is_alphabetic(),
                _ => d.is_ascii_digit(),
            };
            if !same {
                break;
            }
            end = i + d.len_utf8();
            chars.next();
        }
        out.push((kind, start..end));
    }
    // "forty-eight": a hyphen between two words is only a separator.
    let mut cleaned: Vec<(PieceKind, Range<usize>)> = Vec::with_capacity(out.len());
    for (idx, p) in out.iter().enumerate() {
        let is_hyphen = p.0 == PieceKind::Other && &text[p.1.clone()] == "-";
        let between_words = idx > 0
            && out.get(idx + 1).is_some_and(|n| n.0 == PieceKind::Word && n.1.start == p.1.end)
            && out[idx - 1].0 == PieceKind::Word
            && out[idx - 1].1.end == p.1.start;
        if !(is_hyphen && between_words) {
            cleaned.push(p.clone());
        }
    }
    cleaned
}

fn split_words(s: &str) -> Vec<String> {
    s.split(|c: char| c.is_whitespace() || c == '-').filter(|w| !w.is_empty()).map(|w| w.to_lowercase()).collect()
}
