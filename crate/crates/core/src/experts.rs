//! Expert modules: calculator, date, currency, database lookup and the
//! fallback completion proxy.
//!
//! Symbolic experts answer with confidence 1.0 when the input matches their
//! pattern set and decline otherwise. External state (clock, exchange rates,
//! records) is injected at construction, never read ambiently.

use alloc::borrow::ToOwned;
use alloc::boxed::Box;
use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::arithmetic::ExactNumber;
use crate::extractor::{ExtractError, Extractor};
use crate::numword::Lexicon;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExpertKind {
    Symbolic,
    NeuralProxy,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExpertDescriptor {
    pub name: String,
    pub kind: ExpertKind,
    pub description: String,
}

impl ExpertDescriptor {
    pub fn new(name: &str, kind: ExpertKind, description: &str) -> Self {
        ExpertDescriptor { name: name.to_string(), kind, description: description.to_string() }
    }
}

/// Calendar date, proleptic Gregorian.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CivilDate {
    year: i32,
    month: u8,
    day: u8,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("invalid date `{0}` (expected YYYY-MM-DD)")]
pub struct DateError(pub String);

impl CivilDate {
    pub fn new(year: i32, month: u8, day: u8) -> Option<Self> {
        let leap = (year % 4 == 0 && year % 100 != 0) || year % 400 == 0;
        let days = match month {
            1 | 3 | 5 | 7 | 8 | 10 | 12 => 31,
            4 | 6 | 9 | 11 => 30,
            2 if leap => 29,
            2 => 28,
            _ => return None,
        };
        (1..=days).contains(&day).then_some(CivilDate { year, month, day })
    }

    pub fn year(&self) -> i32 {
        self.year
    }

    pub fn month(&self) -> u8 {
        self.month
    }

    pub fn day(&self) -> u8 {
        self.day
    }
}

impl fmt::Display for CivilDate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:04}-{:02}-{:02}", self.year, self.month, self.day)
    }
}

impl FromStr for CivilDate {
    type Err = DateError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = || DateError(s.to_string());
        let mut parts = s.trim().splitn(3, '-');
        let (y, m, d) = (parts.next().ok_or_else(err)?, parts.next().ok_or_else(err)?, parts.next().ok_or_else(err)?);
        if y.len() != 4 || m.len() != 2 || d.len() != 2 {
            return Err(err());
        }
        CivilDate::new(y.parse().map_err(|_| err())?, m.parse().map_err(|_| err())?, d.parse().map_err(|_| err())?)
            .ok_or_else(err)
    }
}

impl Serialize for CivilDate {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for CivilDate {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum Payload {
    Number { value: ExactNumber },
    Amount { value: ExactNumber, currency: String },
    Date { value: CivilDate },
    Record { key: String, fields: BTreeMap<String, String> },
    NotFound { key: String },
    Completion { text: String },
    Error { message: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpertResponse {
    pub answer_text: String,
    pub payload: Payload,
    pub confidence: f64,
    pub rationale: String,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Handled {
    Answer(ExpertResponse),
    Decline(String),
}

impl Handled {
    pub fn confidence(&self) -> f64 {
        match self {
            Handled::Answer(r) => r.confidence,
            Handled::Decline(_) => 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{0}")]
pub struct ExpertError(pub String);

pub trait Expert {
    fn descriptor(&self) -> ExpertDescriptor;

    fn handle(&self, text: &str) -> Result<Handled, ExpertError>;
}

impl<T: Expert + ?Sized> Expert for Box<T> {
    fn descriptor(&self) -> ExpertDescriptor {
        (**self).descriptor()
    }

    fn handle(&self, text: &str) -> Result<Handled, ExpertError> {
        (**self).handle(text)
    }
}

// Lowercase words with punctuation removed; apostrophes vanish so
// "today's" and "todays" compare equal.
fn simplify(text: &str) -> Vec<String> {
    let cleaned: String = text
        .chars()
        .filter(|c| *c != '\'' && *c != '’')
        .map(|c| if c.is_alphanumeric() || c == '.' { c } else { ' ' })
        .collect();
    cleaned.split_whitespace().map(|w| w.trim_matches('.').to_lowercase()).filter(|w| !w.is_empty()).collect()
}

pub struct Calculator<E> {
    extractor: E,
}

impl<E: Extractor> Calculator<E> {
    pub fn new(extractor: E) -> Self {
        Calculator { extractor }
    }

    pub fn extractor(&self) -> &E {
        &self.extractor
    }
}

impl<E: Extractor> Expert for Calculator<E> {
    fn descriptor(&self) -> ExpertDescriptor {
        ExpertDescriptor::new(
            "calculator",
            ExpertKind::Symbolic,
            "exact arithmetic over one- and two-operation questions",
        )
    }

    fn handle(&self, text: &str) -> Result<Handled, ExpertError> {
        let extraction = match self.extractor.extract(text) {
            Ok(x) => x,
            Err(ExtractError::NoParse(reason)) => return Ok(Handled::Decline(reason.to_string())),
            Err(e @ ExtractError::Transport(_)) => return Err(ExpertError(e.to_string())),
        };
        let call = extraction.expr.to_calculator_call();
        let response = match extraction.expr.evaluate() {
            Ok(value) => ExpertResponse {
                answer_text: value.to_string(),
                rationale: format!("calculator evaluated {call} = {value} (extractor: {})", self.extractor.name()),
                payload: Payload::Number { value },
                confidence: 1.0,
            },
            Err(e) => ExpertResponse {
                answer_text: format!("error: {e}"),
                rationale: format!("calculator could not evaluate {call}: {e}"),
                payload: Payload::Error { message: e.to_string() },
                confidence: 1.0,
            },
        };
        Ok(Handled::Answer(response))
    }
}

pub trait Clock {
    fn today(&self) -> CivilDate;
}

#[derive(Debug, Clone, Copy)]
pub struct FixedClock(pub CivilDate);

impl Clock for FixedClock {
    fn today(&self) -> CivilDate {
        self.0
    }
}

const DATE_QUESTIONS: &[&str] = &[
    "what is todays date",
    "whats todays date",
    "todays date",
    "what is the date",
    "whats the date",
    "what is the date today",
    "whats the date today",
    "what date is it",
    "what date is it today",
    "what is the current date",
    "whats the current date",
    "current date",
];

pub struct DateExpert<C> {
    clock: C,
}

impl<C: Clock> DateExpert<C> {
    pub fn new(clock: C) -> Self {
        DateExpert { clock }
    }
}

impl<C: Clock> Expert for DateExpert<C> {
    fn descriptor(&self) -> ExpertDescriptor {
        ExpertDescriptor::new("date", ExpertKind::Symbolic, "today's date from the injected clock")
    }

    fn handle(&self, text: &str) -> Result<Handled, ExpertError> {
        let q = simplify(text).join(" ");
        if !DATE_QUESTIONS.contains(&q.as_str()) {
            return Ok(Handled::Decline("not a date question".into()));
        }
        let today = self.clock.today();
        Ok(Handled::Answer(ExpertResponse {
            answer_text: today.to_string(),
            payload: Payload::Date { value: today },
            confidence: 1.0,
            rationale: format!("date expert read the clock: {today}"),
        }))
    }
}

/// Exchange rates keyed by (from, to) currency code.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RateTable {
    pub timestamp: String,
    rates: BTreeMap<(String, String), ExactNumber>,
}

impl RateTable {
    pub fn new(timestamp: &str) -> Self {
        RateTable { timestamp: timestamp.to_string(), rates: BTreeMap::new() }
    }

    pub fn insert(&mut self, from: &str, to: &str, rate: ExactNumber) {
        self.rates.insert((from.to_uppercase(), to.to_uppercase()), rate);
    }

    pub fn len(&self) -> usize {
        self.rates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rates.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str, &ExactNumber)> {
        self.rates.iter().map(|((a, b), r)| (a.as_str(), b.as_str(), r))
    }

    /// Direct rate, else the reciprocal of the reverse pair.
    pub fn rate(&self, from: &str, to: &str) -> Option<ExactNumber> {
        let key = |a: &str, b: &str| (a.to_uppercase(), b.to_uppercase());
        if let Some(r) = self.rates.get(&key(from, to)) {
            return Some(r.clone());
        }
        self.rates.get(&key(to, from)).and_then(ExactNumber::recip)
    }
}

pub struct CurrencyExpert {
    rates: RateTable,
    lexicon: Lexicon,
}

impl CurrencyExpert {
    pub fn new(rates: RateTable) -> Self {
        CurrencyExpert { rates, lexicon: Lexicon::default() }
    }

    pub fn rates(&self) -> &RateTable {
        &self.rates
    }

    // "convert <amount> <CUR> to|into <CUR>" or "how much is <amount> <CUR> in <CUR>"
    fn parse_request(&self, text: &str) -> Option<(ExactNumber, String, String)> {
        let words = simplify(text);
        let body = if words.first().map(String::as_str) == Some("convert") {
            &words[1..]
        } else if words.len() > 3 && words[..3] == ["how", "much", "is"] {
            &words[3..]
        } else {
            return None;
        };
        let n = body.len();
        if n < 4 || !matches!(body[n - 2].as_str(), "to" | "into" | "in") {
            return None;
        }
        let is_code = |w: &str| w.len() == 3 && w.bytes().all(|b| b.is_ascii_alphabetic());
        let (from, to) = (&body[n - 3], &body[n - 1]);
        if !is_code(from) || !is_code(to) {
            return None;
        }
        let amount_words = &body[..n - 3];
        let amount =
            if amount_words.len() == 1 { ExactNumber::parse(&amount_words[0]).ok() } else { None }.or_else(|| {
                let refs: Vec<&str> = amount_words.iter().map(String::as_str).collect();
                self.lexicon.parse_words(&refs).map(ExactNumber::from)
            })?;
        Some((amount, from.to_uppercase(), to.to_uppercase()))
    }
}

impl Expert for CurrencyExpert {
    fn descriptor(&self) -> ExpertDescriptor {
        ExpertDescriptor::new("currency", ExpertKind::Symbolic, "currency conversion from a rates table")
    }

    fn handle(&self, text: &str) -> Result<Handled, ExpertError> {
        let Some((amount, from, to)) = self.parse_request(text) else {
            return Ok(Handled::Decline("not a conversion request".into()));
        };
        let Some(rate) = self.rates.rate(&from, &to) else {
            return Ok(Handled::Decline(format!("unknown currency pair {from}->{to}")));
        };
        let value = &amount * &rate;
        Ok(Handled::Answer(ExpertResponse {
            answer_text: format!("{value} {to}"),
            rationale: format!(
                "currency expert: {amount} {from} x {rate} ({from}->{to} rate as of {}) = {value} {to}",
                self.rates.timestamp
            ),
            payload: Payload::Amount { value, currency: to },
            confidence: 1.0,
        }))
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RecordStore {
    pub name: String,
    records: BTreeMap<String, BTreeMap<String, String>>,
}

impl RecordStore {
    pub fn new(name: &str) -> Self {
        RecordStore { name: name.to_string(), records: BTreeMap::new() }
    }

    /// Keys are case-insensitive.
    pub fn insert(&mut self, key: &str, fields: BTreeMap<String, String>) {
        self.records.insert(key.to_lowercase(), fields);
    }

    pub fn get(&self, key: &str) -> Option<&BTreeMap<String, String>> {
        self.records.get(&key.to_lowercase())
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}

const LOOKUP_TRIGGERS: &[&[&str]] =
    &[&["look", "up"], &["lookup"], &["find", "record"], &["fetch", "record"], &["show", "record"]];

pub struct DatabaseExpert {
    store: RecordStore,
}

impl DatabaseExpert {
    pub fn new(store: RecordStore) -> Self {
        DatabaseExpert { store }
    }

    pub fn store(&self) -> &RecordStore {
        &self.store
    }
}

impl Expert for DatabaseExpert {
    fn descriptor(&self) -> ExpertDescriptor {
        ExpertDescriptor::new("database", ExpertKind::Symbolic, "record lookup by key")
    }

    fn handle(&self, text: &str) -> Result<Handled, ExpertError> {
        let words = simplify(text);
        let rest = LOOKUP_TRIGGERS.iter().find_map(|t| {
            let n = t.len();
            (words.len() > n && words[..n].iter().zip(t.iter()).all(|(a, b)| a == b)).then(|| &words[n..])
        });
        let Some(mut rest) = rest else {
            return Ok(Handled::Decline("not a lookup request".into()));
        };
        if rest.first().map(String::as_str) == Some("for") && rest.len() > 1 {
            rest = &rest[1..];
        }
        let key = rest.join(" ");
        let store = &self.store.name;
        let response = match self.store.get(&key) {
            Some(fields) => ExpertResponse {
                answer_text: format!(
                    "{key}: {}",
                    fields.iter().map(|(k, v)| format!("{k}={v}")).collect::<Vec<_>>().join(", ")
                ),
                rationale: format!("database expert looked up key `{key}` in store `{store}`"),
                payload: Payload::Record { key: key.clone(), fields: fields.clone() },
                confidence: 1.0,
            },
            None => ExpertResponse {
                answer_text: format!("no record for `{key}`"),
                rationale: format!("database expert found no key `{key}` in store `{store}`"),
                payload: Payload::NotFound { key: key.clone() },
                confidence: 1.0,
            },
        };
        Ok(Handled::Answer(response))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{0}")]
pub struct TransportError(pub String);

/// A general-purpose text completion service.
pub trait CompletionBackend {
    fn name(&self) -> &str;

    fn complete(&self, text: &str) -> Result<String, TransportError>;
}

pub const STUB_COMPLETION: &str = "[no symbolic expert handles this input]";

/// Canned completion; stands in for a hosted language model.
#[derive(Debug, Clone, Copy, Default)]
pub struct StubCompletion;

impl CompletionBackend for StubCompletion {
    fn name(&self) -> &str {
        "stub"
    }

    fn complete(&self, _text: &str) -> Result<String, TransportError> {
        Ok(STUB_COMPLETION.to_owned())
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct EchoCompletion;

impl CompletionBackend for EchoCompletion {
    fn name(&self) -> &str {
        "echo"
    }

    fn complete(&self, text: &str) -> Result<String, TransportError> {
        Ok(text.to_owned())
    }
}

pub struct FallbackExpert {
    backend: Box<dyn CompletionBackend + Send + Sync>,
}

impl FallbackExpert {
    pub fn new(backend: impl CompletionBackend + Send + Sync + 'static) -> Self {
        FallbackExpert { backend: Box::new(backend) }
    }

    pub fn stub() -> Self {
        Self::new(StubCompletion)
    }

    pub fn backend_name(&self) -> &str {
        self.backend.name()
    }

    /// Never declines. Transport failures come back as an error payload.
    pub fn respond(&self, text: &str) -> ExpertResponse {
        let backend = self.backend.name();
        match self.backend.complete(text) {
            Ok(completion) => ExpertResponse {
                answer_text: completion.clone(),
                payload: Payload::Completion { text: completion },
                confidence: 0.0,
                rationale: format!("fallback: completion from backend `{backend}`"),
            },
            Err(e) => ExpertResponse {
                answer_text: format!("error: fallback backend unavailable: {e}"),
                payload: Payload::Error { message: e.to_string() },
                confidence: 0.0,
                rationale: format!("fallback: backend `{backend}` failed: {e}"),
            },
        }
    }
}

impl Expert for FallbackExpert {
    fn descriptor(&self) -> ExpertDescriptor {
        ExpertDescriptor::new(
            "fallback",
            ExpertKind::NeuralProxy,
            "general-purpose completion for inputs no other expert handles",
        )
    }

    fn handle(&self, text: &str) -> Result<Handled, ExpertError> {
        Ok(Handled::Answer(self.respond(text)))
    }
}
