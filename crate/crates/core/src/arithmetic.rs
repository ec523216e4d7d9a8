//! Expression trees, exact evaluation and the calculator-call format.
//!
//! A calculator call is fully parenthesized infix over decimal integers and
//! `+ - * /`, e.g. `(2+(4*8))`. Every binary node is wrapped in exactly one
//! pair of parentheses, so the string determines the tree. The parser also
//! accepts ordinary infix with standard precedence (`2+4*8`), which makes it
//! usable on replies from external extractors.

use alloc::boxed::Box;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Op {
    Add,
    Sub,
    Mul,
    Div,
}

impl Op {
    pub const ALL: [Op; 4] = [Op::Add, Op::Sub, Op::Mul, Op::Div];

    pub fn symbol(self) -> char {
        match self {
            Op::Add => '+',
            Op::Sub => '-',
            Op::Mul => '*',
            Op::Div => '/',
        }
    }

    pub fn from_symbol(c: char) -> Option<Op> {
        Op::ALL.into_iter().find(|op| op.symbol() == c)
    }

    /// Short name used in files and tables: `add`, `sub`, `mul`, `div`.
    pub fn name(self) -> &'static str {
        match self {
            Op::Add => "add",
            Op::Sub => "sub",
            Op::Mul => "mul",
            Op::Div => "div",
        }
    }

    pub fn from_name(s: &str) -> Option<Op> {
        Op::ALL.into_iter().find(|op| op.name() == s)
    }

    pub fn precedence(self) -> u8 {
        match self {
            Op::Add | Op::Sub => 1,
            Op::Mul | Op::Div => 2,
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Op {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Binary expression tree over non-negative integer operands.
///
/// Bracketing is explicit in the tree shape: `(A+B)*C` and `A+(B*C)` are
/// different values of this type.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ArithExpr {
    Leaf(u64),
    Node { op: Op, left: Box<ArithExpr>, right: Box<ArithExpr> },
}

impl ArithExpr {
    pub fn node(op: Op, left: ArithExpr, right: ArithExpr) -> Self {
        ArithExpr::Node { op, left: Box::new(left), right: Box::new(right) }
    }

    pub fn leaf_count(&self) -> usize {
        match self {
            ArithExpr::Leaf(_) => 1,
            ArithExpr::Node { left, right, .. } => left.leaf_count() + right.leaf_count(),
        }
    }

    /// Operands in reading order.
    pub fn leaves(&self) -> Vec<u64> {
        let mut out = Vec::new();
        self.walk(&mut |e| {
            if let ArithExpr::Leaf(v) = e {
                out.push(*v);
            }
        });
        out
    }

    /// Operators in reading (in-order) order.
    pub fn ops(&self) -> Vec<Op> {
        fn go(e: &ArithExpr, out: &mut Vec<Op>) {
            if let ArithExpr::Node { op, left, right } = e {
                go(left, out);
                out.push(*op);
                go(right, out);
            }
        }
        let mut out = Vec::new();
        go(self, &mut out);
        out
    }

    fn walk(&self, f: &mut impl FnMut(&ArithExpr)) {
        if let ArithExpr::Node { left, right, .. } = self {
            left.walk(f);
            f(self);
            right.walk(f);
        } else {
            f(self);
        }
    }

    /// Replace each leaf `i` with `values[i]`; used to fill template shapes.
    pub fn fill(&self, values: &[u64]) -> Option<ArithExpr> {
        Some(match self {
            ArithExpr::Leaf(i) => ArithExpr::Leaf(*values.get(usize::try_from(*i).ok()?)?),
            ArithExpr::Node { op, left, right } => ArithExpr::node(*op, left.fill(values)?, right.fill(values)?),
        })
    }

    pub fn evaluate(&self) -> Result<ExactNumber, EvalError> {
        match self {
            ArithExpr::Leaf(v) => Ok(ExactNumber::from(*v)),
            ArithExpr::Node { op, left, right } => {
                let l = left.evaluate()?;
                let r = right.evaluate()?;
                Ok(match op {
                    Op::Add => l + r,
                    Op::Sub => l - r,
                    Op::Mul => l * r,
                    Op::Div => l.checked_div(&r).ok_or_else(|| EvalError::DivisionByZero { subtree: self.clone() })?,
                })
            }
        }
    }

    pub fn to_calculator_call(&self) -> String {
        self.to_string()
    }

    /// The tree obtained by reading the same operands and operators left to
    /// right with standard precedence and left associativity.
    pub fn standard_precedence(&self) -> ArithExpr {
        parse_with_precedence(&self.leaves(), &self.ops())
    }

    /// True when the bracketing differs from standard precedence.
    pub fn requires_brackets(&self) -> bool {
        *self != self.standard_precedence()
    }
}

pub fn evaluate(expr: &ArithExpr) -> Result<ExactNumber, EvalError> {
    expr.evaluate()
}

pub fn structurally_equal(a: &ArithExpr, b: &ArithExpr) -> bool {
    a == b
}

fn parse_with_precedence(leaves: &[u64], ops: &[Op]) -> ArithExpr {
    let mut operands: Vec<ArithExpr> = Vec::new();
    let mut pending: Vec<Op> = Vec::new();
    let reduce = |operands: &mut Vec<ArithExpr>, op: Op| {
        let r = operands.pop().expect("operand");
        let l = operands.pop().expect("operand");
        operands.push(ArithExpr::node(op, l, r));
    };
    operands.push(ArithExpr::Leaf(leaves[0]));
    for (op, &leaf) in ops.iter().zip(&leaves[1..]) {
        while let Some(&top) = pending.last() {
            if top.precedence() >= op.precedence() {
                pending.pop();
                reduce(&mut operands, top);
            } else {
                break;
            }
        }
        pending.push(*op);
        operands.push(ArithExpr::Leaf(leaf));
    }
    while let Some(top) = pending.pop() {
        reduce(&mut operands, top);
    }
    operands.pop().expect("non-empty expression")
}

impl fmt::Display for ArithExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ArithExpr::Leaf(v) => write!(f, "{v}"),
            ArithExpr::Node { op, left, right } => write!(f, "({left}{}{right})", op.symbol()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EvalError {
    #[error("division by zero in {subtree}")]
    DivisionByZero { subtree: ArithExpr },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CallParseError {
    #[error("empty calculator call")]
    Empty,
    #[error("unexpected `{found}` at offset {at}")]
    Unexpected { found: char, at: usize },
    #[error("unexpected end of input")]
    UnexpectedEnd,
    #[error("operand `{0}` does not fit in 64 bits")]
    Overflow(String),
}

/// Parse a calculator call (fully parenthesized or plain infix).
pub fn parse_calculator_call(s: &str) -> Result<ArithExpr, CallParseError> {
    let toks: Vec<(usize, char)> = s.char_indices().filter(|(_, c)| !c.is_whitespace()).collect();
    if toks.is_empty() {
        return Err(CallParseError::Empty);
    }
    let mut p = CallParser { src: s, toks, pos: 0 };
    let e = p.expr(1)?;
    match p.toks.get(p.pos) {
        None => Ok(e),
        Some(&(at, found)) => Err(CallParseError::Unexpected { found, at }),
    }
}

impl FromStr for ArithExpr {
    type Err = CallParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_calculator_call(s)
    }
}

struct CallParser<'a> {
    src: &'a str,
    toks: Vec<(usize, char)>,
    pos: usize,
}

impl CallParser<'_> {
    // Precedence climbing; all operators are left associative.
    fn expr(&mut self, min_prec: u8) -> Result<ArithExpr, CallParseError> {
        let mut lhs = self.atom()?;
        while let Some(op) = self.toks.get(self.pos).and_then(|&(_, c)| Op::from_symbol(c)) {
            if op.precedence() < min_prec {
                break;
            }
            self.pos += 1;
            let rhs = self.expr(op.precedence() + 1)?;
            lhs = ArithExpr::node(op, lhs, rhs);
        }
        Ok(lhs)
    }

    fn atom(&mut self) -> Result<ArithExpr, CallParseError> {
        let &(at, c) = self.toks.get(self.pos).ok_or(CallParseError::UnexpectedEnd)?;
        if c == '(' {
            self.pos += 1;
            let e = self.expr(1)?;
            return match self.toks.get(self.pos) {
                Some(&(_, ')')) => {
                    self.pos += 1;
                    Ok(e)
                }
                Some(&(at, found)) => Err(CallParseError::Unexpected { found, at }),
                None => Err(CallParseError::UnexpectedEnd),
            };
        }
        if !c.is_ascii_digit() {
            return Err(CallParseError::Unexpected { found: c, at });
        }
        let start = self.pos;
        while self.toks.get(self.pos).is_some_and(|(_, c)| c.is_ascii_digit()) {
            // Digits separated by whitespace are not one number.
            if self.pos > start && self.toks[self.pos].0 != self.toks[self.pos - 1].0 + 1 {
                break;
            }
            self.pos += 1;
        }
        let text = &self.src[self.toks[start].0..self.toks[self.pos - 1].0 + 1];
        text.parse().map(ArithExpr::Leaf).map_err(|_| CallParseError::Overflow(text.to_string()))
    }
}

/// Exact rational number, always in lowest terms with a positive denominator.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ExactNumber(BigRational);

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("invalid number `{0}`")]
pub struct NumberParseError(pub String);

impl ExactNumber {
    pub fn zero() -> Self {
        ExactNumber(BigRational::zero())
    }

    pub fn new(numer: i64, denom: i64) -> Option<Self> {
        (denom != 0).then(|| ExactNumber(BigRational::new(numer.into(), denom.into())))
    }

    pub fn numer(&self) -> &BigInt {
        self.0.numer()
    }

    pub fn denom(&self) -> &BigInt {
        self.0.denom()
    }

    pub fn is_integer(&self) -> bool {
        self.0.is_integer()
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_zero()
    }

    pub fn checked_div(&self, rhs: &ExactNumber) -> Option<ExactNumber> {
        (!rhs.0.is_zero()).then(|| ExactNumber(&self.0 / &rhs.0))
    }

    pub fn recip(&self) -> Option<ExactNumber> {
        (!self.0.is_zero()).then(|| ExactNumber(self.0.recip()))
    }

    pub fn to_f64(&self) -> f64 {
        self.0.to_f64().unwrap_or(f64::NAN)
    }

    /// Parses `-12`, `3.25` or `7/4`.
    pub fn parse(s: &str) -> Result<Self, NumberParseError> {
        let err = || NumberParseError(s.to_string());
        let (neg, body) = match s.strip_prefix('-') {
            Some(rest) => (true, rest),
            None => (false, s),
        };
        let digits = |t: &str| !t.is_empty() && t.bytes().all(|b| b.is_ascii_digit());
        let value = if let Some((n, d)) = body.split_once('/') {
            if !digits(n) || !digits(d) {
                return Err(err());
            }
            let d: BigInt = d.parse().map_err(|_| err())?;
            if d.is_zero() {
                return Err(err());
            }
            BigRational::new(n.parse().map_err(|_| err())?, d)
        } else if let Some((i, frac)) = body.split_once('.') {
            if !digits(i) || !digits(frac) {
                return Err(err());
            }
            let scale = num_traits::pow(BigInt::from(10), frac.len());
            let whole: BigInt = alloc::format!("{i}{frac}").parse().map_err(|_| err())?;
            BigRational::new(whole, scale)
        } else {
            if !digits(body) {
                return Err(err());
            }
            BigRational::from_integer(body.parse().map_err(|_| err())?)
        };
        Ok(ExactNumber(if neg { -value } else { value }))
    }
}

impl From<u64> for ExactNumber {
    fn from(v: u64) -> Self {
        ExactNumber(BigRational::from_integer(v.into()))
    }
}

impl From<i64> for ExactNumber {
    fn from(v: i64) -> Self {
        ExactNumber(BigRational::from_integer(v.into()))
    }
}

impl FromStr for ExactNumber {
    type Err = NumberParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ExactNumber::parse(s)
    }
}

macro_rules! forward_binop {
    ($trait:ident, $method:ident) => {
        impl core::ops::$trait for ExactNumber {
            type Output = ExactNumber;

            fn $method(self, rhs: ExactNumber) -> ExactNumber {
                ExactNumber(core::ops::$trait::$method(self.0, rhs.0))
            }
        }

        impl core::ops::$trait<&ExactNumber> for &ExactNumber {
            type Output = ExactNumber;

            fn $method(self, rhs: &ExactNumber) -> ExactNumber {
                ExactNumber(core::ops::$trait::$method(&self.0, &rhs.0))
            }
        }
    };
}

forward_binop!(Add, add);
forward_binop!(Sub, sub);
forward_binop!(Mul, mul);

/// Terminating decimals print exactly (`2.5`, `70`, `-0.125`); anything
/// else prints as `p/q` in lowest terms.
impl fmt::Display for ExactNumber {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let numer = self.0.numer();
        let mut den = self.0.denom().clone();
        let (two, five) = (BigInt::from(2), BigInt::from(5));
        let (mut k2, mut k5) = (0usize, 0usize);
        while den.is_even() {
            den /= &two;
            k2 += 1;
        }
        while (&den % &five).is_zero() {
            den /= &five;
            k5 += 1;
        }
        if !den.is_one() {
            return write!(f, "{}/{}", numer, self.0.denom());
        }
        let places = k2.max(k5);
        let scaled = numer * num_traits::pow(BigInt::from(10), places) / self.0.denom();
        if places == 0 {
            return write!(f, "{scaled}");
        }
        let digits = scaled.abs().to_string();
        let padded = if digits.len() <= places {
            let mut s = "0".repeat(places + 1 - digits.len());
            s.push_str(&digits);
            s
        } else {
            digits
        };
        let (int, frac) = padded.split_at(padded.len() - places);
        let sign = if scaled.is_negative() { "-" } else { "" };
        write!(f, "{sign}{int}.{frac}")
    }
}

impl Serialize for ExactNumber {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for ExactNumber {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        ExactNumber::parse(&s).map_err(serde::de::Error::custom)
    }
}
