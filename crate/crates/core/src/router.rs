//! Confidence-threshold dispatch over a registry of experts.
//!
//! Every registered expert is asked about every input. The first expert
//! (in registration order) with the highest confidence at or above the
//! threshold answers; if none qualifies, the fallback does. Routing never
//! fails: an expert that errors is scored 0 and the error is kept in the
//! trace.

use alloc::boxed::Box;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::ser::SerializeMap;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::experts::{Expert, ExpertDescriptor, ExpertResponse, FallbackExpert, Handled};

pub const DEFAULT_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RouterError {
    #[error("an expert named `{0}` is already registered")]
    Duplicate(String),
    #[error("threshold {0} is outside [0, 1]")]
    Threshold(String),
}

/// Expert name → confidence, in registration order (fallback last).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Scores(pub Vec<(String, f64)>);

impl Scores {
    pub fn get(&self, name: &str) -> Option<f64> {
        self.0.iter().find(|(n, _)| n == name).map(|(_, s)| *s)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, f64)> {
        self.0.iter().map(|(n, s)| (n.as_str(), *s))
    }
}

impl Serialize for Scores {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let mut map = s.serialize_map(Some(self.0.len()))?;
        for (name, score) in &self.0 {
            map.serialize_entry(name, score)?;
        }
        map.end()
    }
}

impl<'de> Deserialize<'de> for Scores {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        struct V;
        impl<'de> serde::de::Visitor<'de> for V {
            type Value = Scores;

            fn expecting(&self, f: &mut core::fmt::Formatter) -> core::fmt::Result {
                f.write_str("a map of expert name to confidence")
            }

            fn visit_map<A: serde::de::MapAccess<'de>>(self, mut m: A) -> Result<Scores, A::Error> {
                let mut out = Vec::new();
                while let Some(entry) = m.next_entry::<String, f64>()? {
                    out.push(entry);
                }
                Ok(Scores(out))
            }
        }
        d.deserialize_map(V)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpertFailure {
    pub expert: String,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoutingDecision {
    pub input: String,
    pub scores: Scores,
    pub chosen: String,
    pub used_fallback: bool,
    pub response: ExpertResponse,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub errors: Vec<ExpertFailure>,
}

pub type DynExpert = Box<dyn Expert + Send + Sync>;

pub struct Router {
    experts: Vec<(String, DynExpert)>,
    fallback: FallbackExpert,
    threshold: f64,
}

impl Router {
    pub fn new(fallback: FallbackExpert) -> Self {
        Router { experts: Vec::new(), fallback, threshold: DEFAULT_THRESHOLD }
    }

    pub fn with_threshold(mut self, threshold: f64) -> Result<Self, RouterError> {
        if !(0.0..=1.0).contains(&threshold) {
            return Err(RouterError::Threshold(threshold.to_string()));
        }
        self.threshold = threshold;
        Ok(self)
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn register(&mut self, expert: impl Expert + Send + Sync + 'static) -> Result<(), RouterError> {
        self.register_boxed(Box::new(expert))
    }

    pub fn register_boxed(&mut self, expert: DynExpert) -> Result<(), RouterError> {
        let name = expert.descriptor().name;
        let fallback = self.fallback.descriptor().name;
        if name == fallback || self.experts.iter().any(|(n, _)| *n == name) {
            return Err(RouterError::Duplicate(name));
        }
        self.experts.push((name, expert));
        Ok(())
    }

    /// Registered experts in order, followed by the fallback.
    pub fn descriptors(&self) -> Vec<ExpertDescriptor> {
        let mut out: Vec<_> = self.experts.iter().map(|(_, e)| e.descriptor()).collect();
        out.push(self.fallback.descriptor());
        out
    }

    pub fn route(&self, text: &str) -> RoutingDecision {
        let mut scores = Vec::with_capacity(self.experts.len() + 1);
        let mut errors = Vec::new();
        let mut best: Option<(f64, &str, ExpertResponse)> = None;
        for (name, expert) in &self.experts {
            let score = match expert.handle(text) {
                Ok(Handled::Answer(response)) => {
                    let c = response.confidence;
                    let c = if c.is_nan() { 0.0 } else { c.clamp(0.0, 1.0) };
                    if c >= self.threshold && best.as_ref().is_none_or(|(b, _, _)| c > *b) {
                        best = Some((c, name, response));
                    }
                    c
                }
                Ok(Handled::Decline(_)) => 0.0,
                Err(e) => {
                    errors.push(ExpertFailure { expert: name.clone(), error: e.to_string() });
                    0.0
                }
            };
            scores.push((name.clone(), score));
        }
        let fallback_name = self.fallback.descriptor().name;
        scores.push((fallback_name.clone(), 0.0));
        let (chosen, used_fallback, response) = match best {
            Some((_, name, response)) => (name.to_string(), false, response),
            None => (fallback_name, true, self.fallback.respond(text)),
        };
        RoutingDecision { input: text.to_string(), scores: Scores(scores), chosen, used_fallback, response, errors }
    }
}
