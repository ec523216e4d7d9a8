//! Natural language to arithmetic argument extraction.
//!
//! An [`Extractor`] turns an utterance into an [`ArithExpr`] for the
//! calculator. [`ReferenceExtractor`] is a deterministic grammar over the
//! normalized token stream; other backends (for instance a language model
//! behind the line protocol in [`wire`]) plug in through the same trait and
//! are scored by the same harness.

mod grammar;
mod normalize;
pub mod wire;

pub use grammar::MAX_TOKENS;
pub use normalize::{normalize, normalize_with, Symbol, Token};

use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use thiserror::Error;

use crate::arithmetic::ArithExpr;
use crate::numword::Lexicon;
use crate::templates::{full_catalog, Spelling, TemplateId};

#[derive(Debug, Clone, PartialEq)]
pub struct Extraction {
    pub expr: ArithExpr,
    pub confidence: f64,
    pub matched_template: Option<TemplateId>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum NoParseReason {
    UnknownVocabulary(String),
    NoTemplateMatch,
    Ambiguous(usize),
    /// Free-form reason reported by an external backend.
    Other(String),
}

impl NoParseReason {
    /// Wire code: `unknown-vocabulary`, `no-template-match`, `ambiguous`.
    pub fn code(&self) -> &str {
        match self {
            NoParseReason::UnknownVocabulary(_) => "unknown-vocabulary",
            NoParseReason::NoTemplateMatch => "no-template-match",
            NoParseReason::Ambiguous(_) => "ambiguous",
            NoParseReason::Other(s) => s,
        }
    }

    pub fn from_code(code: &str) -> NoParseReason {
        match code {
            "unknown-vocabulary" => NoParseReason::UnknownVocabulary(String::new()),
            "no-template-match" => NoParseReason::NoTemplateMatch,
            "ambiguous" => NoParseReason::Ambiguous(0),
            other => NoParseReason::Other(other.to_string()),
        }
    }
}

impl fmt::Display for NoParseReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NoParseReason::UnknownVocabulary(w) if !w.is_empty() => write!(f, "unknown vocabulary `{w}`"),
            NoParseReason::UnknownVocabulary(_) => f.write_str("unknown vocabulary"),
            NoParseReason::NoTemplateMatch => f.write_str("no template match"),
            NoParseReason::Ambiguous(n) if *n > 0 => write!(f, "ambiguous ({n} readings)"),
            NoParseReason::Ambiguous(_) => f.write_str("ambiguous"),
            NoParseReason::Other(s) => f.write_str(s),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ExtractError {
    #[error("no parse: {0}")]
    NoParse(NoParseReason),
    #[error("backend transport error: {0}")]
    Transport(String),
}

pub trait Extractor {
    fn name(&self) -> &str;

    fn extract(&self, text: &str) -> Result<Extraction, ExtractError>;
}

impl<T: Extractor + ?Sized> Extractor for &T {
    fn name(&self) -> &str {
        (**self).name()
    }

    fn extract(&self, text: &str) -> Result<Extraction, ExtractError> {
        (**self).extract(text)
    }
}

impl<T: Extractor + ?Sized> Extractor for alloc::boxed::Box<T> {
    fn name(&self) -> &str {
        (**self).name()
    }

    fn extract(&self, text: &str) -> Result<Extraction, ExtractError> {
        (**self).extract(text)
    }
}

struct Pattern {
    id: TemplateId,
    shape: ArithExpr,
    tokens: Vec<Token>,
}

/// Grammar-based extractor. Stateless after construction.
pub struct ReferenceExtractor {
    name: String,
    lexicon: Lexicon,
    patterns: Vec<Pattern>,
}

impl Default for ReferenceExtractor {
    fn default() -> Self {
        Self::new()
    }
}

impl ReferenceExtractor {
    pub fn new() -> Self {
        Self::with_lexicon("reference", Lexicon::default())
    }

    /// Same grammar, but number words are not understood.
    pub fn digits_only() -> Self {
        Self::with_lexicon("digits-only", Lexicon::digits_only())
    }

    pub fn with_lexicon(name: &str, lexicon: Lexicon) -> Self {
        let mut patterns = Vec::new();
        for spelling in [Spelling::Corrected, Spelling::Verbatim] {
            for t in full_catalog(spelling) {
                let sentinels: Vec<String> = (1..=t.slots()).map(|i| i.to_string()).collect();
                let tokens = normalize(&t.fill_text(&sentinels));
                if !patterns.iter().any(|p: &Pattern| p.tokens == tokens) {
                    patterns.push(Pattern { id: t.id, shape: t.shape.clone(), tokens });
                }
            }
        }
        ReferenceExtractor { name: name.to_string(), lexicon, patterns }
    }

    pub fn lexicon(&self) -> &Lexicon {
        &self.lexicon
    }

    pub fn normalize(&self, text: &str) -> Vec<Token> {
        normalize_with(text, &self.lexicon)
    }

    pub fn parse(&self, text: &str) -> Result<Extraction, NoParseReason> {
        let tokens = self.normalize(text);
        if let Some(w) = tokens.iter().filter_map(Token::word).find(|w| !grammar::is_known_word(w)) {
            return Err(NoParseReason::UnknownVocabulary(w.to_string()));
        }
        let mut parses = grammar::parse_all(&tokens).into_iter();
        let expr = match (parses.next(), parses.len()) {
            (None, _) => return Err(NoParseReason::NoTemplateMatch),
            (Some(e), 0) => e,
            (Some(_), rest) => return Err(NoParseReason::Ambiguous(rest + 1)),
        };
        let matched_template = self.matching_template(&tokens, &expr);
        Ok(Extraction { expr, confidence: 1.0, matched_template })
    }

    fn matching_template(&self, tokens: &[Token], expr: &ArithExpr) -> Option<TemplateId> {
        self.patterns.iter().find_map(|p| {
            if p.tokens.len() != tokens.len() {
                return None;
            }
            let mut values = Vec::new();
            for (want, got) in p.tokens.iter().zip(tokens) {
                match (want, got) {
                    (Token::Num { .. }, Token::Num { value, .. }) => values.push(*value),
                    (a, b) if a == b => {}
                    _ => return None,
                }
            }
            (p.shape.fill(&values).as_ref() == Some(expr)).then_some(p.id)
        })
    }
}

impl Extractor for ReferenceExtractor {
    fn name(&self) -> &str {
        &self.name
    }

    fn extract(&self, text: &str) -> Result<Extraction, ExtractError> {
        self.parse(text).map_err(ExtractError::NoParse)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arithmetic::Op;

    fn expr(s: &str) -> ArithExpr {
        s.parse().unwrap()
    }

    #[test]
    fn examples() {
        let x = ReferenceExtractor::new();
        let e = x.parse("How much is three minus 1").unwrap();
        assert_eq!(e.expr, expr("(3-1)"));
        assert_eq!(e.confidence, 1.0);

        let e = x.parse("What is the sum of 2 and the product of 4 and 8?").unwrap();
        assert_eq!(e.expr, expr("(2+(4*8))"));
        assert_eq!(e.expr.evaluate().unwrap().to_string(), "34");
        assert_eq!(e.matched_template, Some(TemplateId::Double { formula: 1 }));

        let e = x.parse("The product of 7 and 6 is").unwrap();
        assert_eq!(e.expr, ArithExpr::node(Op::Mul, ArithExpr::Leaf(7), ArithExpr::Leaf(6)));
        assert_eq!(e.matched_template, Some(TemplateId::Single { format: 4, op: Op::Mul }));

        assert!(matches!(x.parse("What color is the sky?"), Err(NoParseReason::UnknownVocabulary(_))));
    }

    #[test]
    fn reasons() {
        let x = ReferenceExtractor::new();
        assert_eq!(x.parse("What is 5?"), Err(NoParseReason::NoTemplateMatch));
        assert_eq!(x.parse("What is the sum of 1 and 2 times 3?"), Err(NoParseReason::Ambiguous(2)));
        assert_eq!(
            ReferenceExtractor::digits_only().parse("How much is twenty seven plus 2?"),
            Err(NoParseReason::UnknownVocabulary("twenty".into()))
        );
    }

    #[test]
    fn synonyms_and_typos() {
        let x = ReferenceExtractor::new();
        assert_eq!(x.parse("What is a dozen times twelve?").unwrap().expr, expr("12*12"));
        assert_eq!(x.parse("How much is 9 less 4").unwrap().expr, expr("9-4"));
        assert_eq!(x.parse("7 multiplied by 3").unwrap().expr, expr("7*3"));
        let e = x.parse("How much is 6 divided bu the sum of 1 and 2?").unwrap();
        assert_eq!(e.expr, expr("6/(1+2)"));
        assert_eq!(e.matched_template, Some(TemplateId::Double { formula: 10 }));
    }

    #[test]
    fn non_template_parse_has_no_template_id() {
        let e = ReferenceExtractor::new().parse("3-1=?").unwrap();
        assert_eq!(e.expr, expr("3-1"));
        assert_eq!(e.matched_template, None);
    }

    #[test]
    fn codes_round_trip() {
        for r in [
            NoParseReason::UnknownVocabulary(String::new()),
            NoParseReason::NoTemplateMatch,
            NoParseReason::Ambiguous(0),
            NoParseReason::Other("timeout".into()),
        ] {
            assert_eq!(NoParseReason::from_code(r.code()), r);
        }
    }
}
