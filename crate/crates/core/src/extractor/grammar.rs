//! All-parses recursive descent over normalized tokens.
//!
//! ```text
//! utterance  := frame? (imperative | expr) suffix?
//! expr       := term  (ADD_OP term)*            left associative
//! term       := atom  (MUL_OP atom)*            left associative
//! atom       := NUM | "(" expr ")" | "the"? PREFIX_OP expr "and" expr
//! imperative := VERB expr "and" expr ("and" POST_OP expr)*
//! ```
//!
//! Prefix phrases ("the sum of A and the product of B and C") bind like a
//! bracketed group. Every parse that consumes the whole body is returned, so
//! callers can tell a unique reading from an ambiguous one.

use alloc::collections::BTreeSet;
use alloc::vec::Vec;

use super::normalize::{Symbol, Token};
use crate::arithmetic::{ArithExpr, Op};

type Phrase = (&'static [&'static str], Op);

const ADD_OPS: &[Phrase] =
    &[(&["plus"], Op::Add), (&["added", "to"], Op::Add), (&["minus"], Op::Sub), (&["less"], Op::Sub)];

const MUL_OPS: &[Phrase] = &[
    (&["times"], Op::Mul),
    (&["multiplied", "by"], Op::Mul),
    (&["over"], Op::Div),
    (&["divided", "by"], Op::Div),
    (&["divided", "bu"], Op::Div),
];

const PREFIX_OPS: &[Phrase] = &[
    (&["sum", "of"], Op::Add),
    (&["difference", "between"], Op::Sub),
    (&["diffrence", "between"], Op::Sub),
    (&["product", "of"], Op::Mul),
    (&["ratio", "between"], Op::Div),
    (&["ratio", "of"], Op::Div),
];

const VERBS: &[Phrase] = &[(&["sum"], Op::Add), (&["add"], Op::Add), (&["multiply"], Op::Mul)];

const POST_OPS: &[Phrase] = &[(&["multiply", "by"], Op::Mul), (&["divide", "by"], Op::Div)];

const FRAMES: &[&[&str]] = &[&[], &["how", "much", "is"], &["what", "is"], &["whats"], &["calculate"], &["compute"]];

const SUFFIXES: &[&[&str]] = &[&[], &["is"], &["equals"]];

const CONNECTIVES: &[&str] = &["the", "and", "result", "of"];

/// Longest body the parser will look at.
pub const MAX_TOKENS: usize = 64;

pub fn is_known_word(w: &str) -> bool {
    let in_table = |t: &[Phrase]| t.iter().any(|(p, _)| p.contains(&w));
    CONNECTIVES.contains(&w)
        || in_table(ADD_OPS)
        || in_table(MUL_OPS)
        || in_table(PREFIX_OPS)
        || in_table(VERBS)
        || in_table(POST_OPS)
        || FRAMES.iter().any(|f| f.contains(&w))
        || SUFFIXES.iter().any(|f| f.contains(&w))
}

/// Distinct expressions with at least one operation that cover the whole
/// utterance under some frame.
pub fn parse_all(tokens: &[Token]) -> BTreeSet<ArithExpr> {
    let mut found = BTreeSet::new();
    if tokens.len() > MAX_TOKENS {
        return found;
    }
    for frame in FRAMES {
        let Some(after_frame) = match_words(tokens, 0, frame) else {
            continue;
        };
        // "what is the result of ..."
        let starts = [Some(after_frame), match_words(tokens, after_frame, &["the", "result", "of"])];
        for start in starts.into_iter().flatten() {
            for suffix in SUFFIXES {
                let Some(end) = tokens.len().checked_sub(suffix.len()) else {
                    continue;
                };
                if end <= start || match_words(tokens, end, suffix) != Some(tokens.len()) {
                    continue;
                }
                let p = Parser { toks: &tokens[..end] };
                for (e, q) in p.expr(start).into_iter().chain(p.imperative(start)) {
                    if q == end && matches!(e, ArithExpr::Node { .. }) {
                        found.insert(e);
                    }
                }
            }
        }
    }
    found
}

fn match_words(tokens: &[Token], at: usize, words: &[&str]) -> Option<usize> {
    let slice = tokens.get(at..at + words.len())?;
    slice.iter().zip(words).all(|(t, w)| t.word() == Some(*w)).then_some(at + words.len())
}

type Parses = Vec<(ArithExpr, usize)>;

struct Parser<'a> {
    toks: &'a [Token],
}

impl Parser<'_> {
    fn phrases(&self, at: usize, table: &[Phrase]) -> Vec<(Op, usize)> {
        table.iter().filter_map(|(words, op)| match_words(self.toks, at, words).map(|q| (*op, q))).collect()
    }

    fn symbol_op(&self, at: usize, wanted: &[(Symbol, Op)]) -> Option<(Op, usize)> {
        match self.toks.get(at) {
            Some(Token::Sym(s)) => wanted.iter().find(|(w, _)| w == s).map(|(_, op)| (*op, at + 1)),
            _ => None,
        }
    }

    fn is_sym(&self, at: usize, s: Symbol) -> bool {
        matches!(self.toks.get(at), Some(Token::Sym(x)) if *x == s)
    }

    fn is_word(&self, at: usize, w: &str) -> bool {
        self.toks.get(at).and_then(Token::word) == Some(w)
    }

    fn infix_ops(&self, at: usize, table: &[Phrase], symbols: &[(Symbol, Op)]) -> Vec<(Op, usize)> {
        let mut ops = self.phrases(at, table);
        ops.extend(self.symbol_op(at, symbols));
        ops
    }

    // One level of a left-associative chain: operand (op operand)*.
    fn chain(
        &self,
        start: usize,
        table: &[Phrase],
        symbols: &[(Symbol, Op)],
        operand: impl Fn(usize) -> Parses,
    ) -> Parses {
        let mut out = Vec::new();
        let mut frontier = operand(start);
        while !frontier.is_empty() {
            let mut next = Vec::new();
            for (lhs, q) in &frontier {
                for (op, q2) in self.infix_ops(*q, table, symbols) {
                    for (rhs, q3) in operand(q2) {
                        next.push((ArithExpr::node(op, lhs.clone(), rhs), q3));
                    }
                }
            }
            out.append(&mut frontier);
            frontier = next;
        }
        out
    }

    fn expr(&self, at: usize) -> Parses {
        self.chain(at, ADD_OPS, &[(Symbol::Plus, Op::Add), (Symbol::Minus, Op::Sub)], |p| self.term(p))
    }

    fn term(&self, at: usize) -> Parses {
        self.chain(at, MUL_OPS, &[(Symbol::Times, Op::Mul), (Symbol::Divide, Op::Div)], |p| self.atom(p))
    }

    fn atom(&self, at: usize) -> Parses {
        let mut out = Vec::new();
        match self.toks.get(at) {
            None => return out,
            Some(Token::Num { value, .. }) => out.push((ArithExpr::Leaf(*value), at + 1)),
            Some(Token::Sym(Symbol::LParen)) => {
                for (e, q) in self.expr(at + 1) {
                    if self.is_sym(q, Symbol::RParen) {
                        out.push((e, q + 1));
                    }
                }
            }
            _ => {}
        }
        let start = if self.is_word(at, "the") { at + 1 } else { at };
        for (op, q) in self.phrases(start, PREFIX_OPS) {
            out.extend(self.binary_args(op, q));
        }
        out
    }

    // `expr "and" expr` combined with `op`.
    fn binary_args(&self, op: Op, at: usize) -> Parses {
        let mut out = Vec::new();
        for (lhs, q) in self.expr(at) {
            if !self.is_word(q, "and") {
                continue;
            }
            for (rhs, q2) in self.expr(q + 1) {
                out.push((ArithExpr::node(op, lhs.clone(), rhs), q2));
            }
        }
        out
    }

    fn imperative(&self, at: usize) -> Parses {
        let mut out = Vec::new();
        let mut frontier: Parses =
            self.phrases(at, VERBS).into_iter().flat_map(|(op, q)| self.binary_args(op, q)).collect();
        while !frontier.is_empty() {
            let mut next = Vec::new();
            for (lhs, q) in &frontier {
                if !self.is_word(*q, "and") {
                    continue;
                }
                for (op, q2) in self.phrases(q + 1, POST_OPS) {
                    for (rhs, q3) in self.expr(q2) {
                        next.push((ArithExpr::node(op, lhs.clone(), rhs), q3));
                    }
                }
            }
            out.append(&mut frontier);
            frontier = next;
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::super::normalize::normalize;
    use super::*;
    use alloc::string::{String, ToString};
    use alloc::vec::Vec;

    fn parses(s: &str) -> Vec<String> {
        parse_all(&normalize(s)).iter().map(|e| e.to_string()).collect()
    }

    #[test]
    fn single_and_nested() {
        assert_eq!(parses("How much is three minus 1"), ["(3-1)"]);
        assert_eq!(parses("What is the sum of 2 and the product of 4 and 8?"), ["(2+(4*8))"]);
        assert_eq!(parses("The product of 7 and 6 is"), ["(7*6)"]);
        assert_eq!(parses("Sum 1 and 2 and multiply by 3"), ["((1+2)*3)"]);
        assert_eq!(parses("How much is the sum of 1 times 2 and 3?"), ["((1*2)+3)"]);
        assert_eq!(parses("What is the ratio between 1 plus 2 and 3?"), ["((1+2)/3)"]);
        assert_eq!(parses("How much is 1 divided by 2 divided by 3?"), ["((1/2)/3)"]);
        assert_eq!(parses("How much is 1 minus 2 plus 3?"), ["((1-2)+3)"]);
        assert_eq!(parses("What is the result of 4 over 2?"), ["(4/2)"]);
    }

    #[test]
    fn symbolic() {
        assert_eq!(parses("3-1=?"), ["(3-1)"]);
        assert_eq!(parses("(2+3)*4"), ["((2+3)*4)"]);
        assert_eq!(parses("2+3*4"), ["(2+(3*4))"]);
    }

    #[test]
    fn ambiguous_phrase_has_two_readings() {
        // sum(1, 2*3) or sum(1, 2)*3
        assert_eq!(parses("What is the sum of 1 and 2 times 3?").len(), 2);
    }

    #[test]
    fn rejects() {
        assert!(parses("What is 5?").is_empty());
        assert!(parses("What is 3 and 4?").is_empty());
        assert!(parses("How much is plus").is_empty());
        assert!(parses("").is_empty());
    }

    #[test]
    fn vocabulary() {
        assert!(is_known_word("plus") && is_known_word("the") && is_known_word("divided"));
        assert!(!is_known_word("sky"));
    }
}
