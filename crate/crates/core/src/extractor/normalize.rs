use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use crate::numword::{Lexicon, Rendering};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Symbol {
    Plus,
    Minus,
    Times,
    Divide,
    LParen,
    RParen,
}

impl Symbol {
    fn from_char(c: char) -> Option<Symbol> {
        Some(match c {
            '+' => Symbol::Plus,
            '-' | '−' => Symbol::Minus,
            '*' | '×' => Symbol::Times,
            '/' | '÷' => Symbol::Divide,
            '(' => Symbol::LParen,
            ')' => Symbol::RParen,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Token {
    Word(String),
    Num { value: u64, rendering: Rendering },
    Sym(Symbol),
}

impl Token {
    pub fn word(&self) -> Option<&str> {
        match self {
            Token::Word(w) => Some(w),
            _ => None,
        }
    }

    pub fn num(value: u64) -> Token {
        Token::Num { value, rendering: Rendering::Digits }
    }
}

impl fmt::Display for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Token::Word(w) => f.write_str(w),
            Token::Num { value, .. } => write!(f, "NUM({value})"),
            Token::Sym(s) => write!(
                f,
                "{}",
                match s {
                    Symbol::Plus => "PLUS",
                    Symbol::Minus => "MINUS",
                    Symbol::Times => "TIMES",
                    Symbol::Divide => "DIVIDE",
                    Symbol::LParen => "LPAREN",
                    Symbol::RParen => "RPAREN",
                }
            ),
        }
    }
}

enum Raw {
    Word(String),
    Digits(String),
    Sym(Symbol),
}

/// Lowercase, drop punctuation other than arithmetic symbols and
/// parentheses, and collapse number spans into `Num` tokens.
///
/// Apostrophes inside words are removed (`today's` → `todays`) and a hyphen
/// between two letters separates words rather than meaning minus.
pub fn normalize_with(text: &str, lexicon: &Lexicon) -> Vec<Token> {
    let raw = scan(text);
    let mut out = Vec::with_capacity(raw.len());
    let mut i = 0;
    while i < raw.len() {
        match &raw[i] {
            Raw::Sym(s) => {
                out.push(Token::Sym(*s));
                i += 1;
            }
            Raw::Digits(d) => {
                let canonical = d.len() <= 9 && !(d.len() > 1 && d.starts_with('0'));
                out.push(match d.parse() {
                    Ok(value) if canonical => Token::Num { value, rendering: Rendering::Digits },
                    _ => Token::Word(d.clone()),
                });
                i += 1;
            }
            Raw::Word(_) => {
                let words: Vec<&str> = raw[i..]
                    .iter()
                    .map_while(|r| match r {
                        Raw::Word(w) => Some(w.as_str()),
                        _ => None,
                    })
                    .collect();
                match lexicon.longest_number(&words) {
                    Some((value, len)) => {
                        out.push(Token::Num { value, rendering: Rendering::Words });
                        i += len;
                    }
                    None => {
                        out.push(Token::Word(words[0].to_string()));
                        i += 1;
                    }
                }
            }
        }
    }
    out
}

pub fn normalize(text: &str) -> Vec<Token> {
    normalize_with(text, &Lexicon::default())
}

fn scan(text: &str) -> Vec<Raw> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_alphabetic() {
            let mut w = String::new();
            while i < chars.len() {
                let c = chars[i];
                let joins_word =
                    (c == '\'' || c == '’') && i + 1 < chars.len() && chars[i + 1].is_alphabetic() && !w.is_empty();
                if c.is_alphabetic() {
                    w.extend(c.to_lowercase());
                } else if !joins_word {
                    break;
                }
                i += 1;
            }
            out.push(Raw::Word(w));
        } else if c.is_ascii_digit() {
            let start = i;
            while i < chars.len() && chars[i].is_ascii_digit() {
                i += 1;
            }
            out.push(Raw::Digits(chars[start..i].iter().collect()));
        } else {
            let hyphenated = c == '-'
                && i > 0
                && chars[i - 1].is_alphabetic()
                && chars.get(i + 1).is_some_and(|n| n.is_alphabetic());
            if !hyphenated {
                if let Some(s) = Symbol::from_char(c) {
                    out.push(Raw::Sym(s));
                }
            }
            i += 1;
        }
    }
    out
}
