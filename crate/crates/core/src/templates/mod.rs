//! Template catalog and synthetic dataset generation.
//!
//! Datasets are built from the fixed catalog of question templates by
//! varying operand values, digit counts, number rendering, operations and
//! bracketing. Each experiment protocol fixes which of those vary on the
//! train side and which on the test side, and how many examples land in
//! each split.
//!
//! Within one dataset every gold expression is distinct (except for the
//! evaluation grid, where uniqueness is per cell and there is no training
//! split), so a test example can never share its expression with a training
//! example even when the wording differs.

mod catalog;

pub use catalog::{
    bracket_free_formula, catalog, catalog_with, full_catalog, template, Spelling, Template, TemplateId, FORMAT_COUNT,
    FORMULA_COUNT,
};

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::ops::RangeInclusive;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::arithmetic::{ArithExpr, ExactNumber, Op};
use crate::numword::{NumWordError, Rendering};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Split {
    Train,
    Dev,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Dev, Split::Test];

    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Dev => "dev",
            Split::Test => "test",
        }
    }

    pub fn parse(s: &str) -> Option<Split> {
        Split::ALL.into_iter().find(|x| x.as_str() == s)
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExampleMeta {
    /// Digit count of each operand, in reading order.
    pub digits: Vec<u8>,
    pub template: TemplateId,
    pub rendering: Rendering,
    pub ops: Vec<Op>,
    pub split: Split,
}

impl ExampleMeta {
    pub fn max_digits(&self) -> u8 {
        self.digits.iter().copied().max().unwrap_or(0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Example {
    pub id: u32,
    pub text: String,
    pub gold_expr: ArithExpr,
    pub gold_answer: ExactNumber,
    pub meta: ExampleMeta,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GenError {
    #[error("invalid dataset spec: {0}")]
    InvalidSpec(String),
    #[error("infeasible: {0}")]
    Infeasible(String),
    #[error("operand arity mismatch: template has {expected} slots, got {got}")]
    Arity { expected: usize, got: usize },
    #[error(transparent)]
    Render(#[from] NumWordError),
    #[error("gold expression cannot be evaluated: {0}")]
    Eval(String),
}

/// Experiment protocols. Counts in [`DatasetSpec::counts`] are interpreted
/// per protocol, see [`DatasetSpec::for_protocol`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Protocol {
    /// Train on single-digit operands, test on 1..=9 digits.
    DigitCount,
    /// Digits vs. words rendering.
    Rendering,
    /// Train on format 0, test on every format.
    Formats,
    /// Single-op problems, one block per operation.
    Operations,
    /// Two-op problems, one block per formula.
    TwoOpFormulae,
    /// Train on single-op problems, test on bracket-free two-op problems.
    OpCount,
    /// Test-only grid over every template, rendering and digit count.
    Grid,
}

impl Protocol {
    pub fn experiment_number(self) -> Option<u8> {
        match self {
            Protocol::DigitCount => Some(1),
            Protocol::Rendering => Some(2),
            Protocol::Formats => Some(3),
            Protocol::Operations | Protocol::TwoOpFormulae => Some(4),
            Protocol::OpCount => Some(5),
            Protocol::Grid => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Protocol::DigitCount => "digit-count",
            Protocol::Rendering => "rendering",
            Protocol::Formats => "formats",
            Protocol::Operations => "operations",
            Protocol::TwoOpFormulae => "two-op-formulae",
            Protocol::OpCount => "op-count",
            Protocol::Grid => "grid",
        }
    }

    pub fn from_name(s: &str) -> Option<Protocol> {
        [
            Protocol::DigitCount,
            Protocol::Rendering,
            Protocol::Formats,
            Protocol::Operations,
            Protocol::TwoOpFormulae,
            Protocol::OpCount,
            Protocol::Grid,
        ]
        .into_iter()
        .find(|p| p.name() == s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SplitCounts {
    pub train: usize,
    pub dev: usize,
    pub test: usize,
}

impl SplitCounts {
    pub const fn new(train: usize, dev: usize, test: usize) -> Self {
        SplitCounts { train, dev, test }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetSpec {
    pub protocol: Protocol,
    pub seed: u64,
    pub counts: SplitCounts,
    /// Digit counts used on the evaluation side.
    pub digits: RangeInclusive<u8>,
    pub renderings: Vec<Rendering>,
    pub operations: Vec<Op>,
    /// Restricts the grid protocol to these templates.
    pub templates: Option<Vec<TemplateId>>,
    pub spelling: Spelling,
}

impl DatasetSpec {
    /// Default sizes per protocol:
    ///
    /// | protocol        | counts (train/dev/test)          | unit                          |
    /// |-----------------|----------------------------------|-------------------------------|
    /// | DigitCount      | 40 / 0 / 50                      | train total; test per d ≥ 2   |
    /// | Rendering       | 100 / 0 / 100                    | per digit count and rendering |
    /// | Formats         | 400 / 200 / 200                  | train total; dev/test per format |
    /// | Operations      | 635 / 315 / 315                  | per operation                 |
    /// | TwoOpFormulae   | 40 / 40 / 40                     | per formula                   |
    /// | OpCount         | 700 / 210 / 210                  | train total; dev/test per op pair |
    /// | Grid            | 0 / 0 / 24                       | per template × rendering × d  |
    ///
    /// DigitCount also places the single-digit pairs not used for training
    /// (81 − train) in the test split.
    pub fn for_protocol(protocol: Protocol, seed: u64) -> Self {
        let all_ops = Op::ALL.to_vec();
        let (counts, digits, renderings, operations) = match protocol {
            Protocol::DigitCount => {
                (SplitCounts::new(40, 0, 50), 1..=9, alloc::vec![Rendering::Digits], alloc::vec![Op::Add])
            }
            Protocol::Rendering => {
                (SplitCounts::new(100, 0, 100), 1..=9, Rendering::ALL.to_vec(), alloc::vec![Op::Add])
            }
            Protocol::Formats => (SplitCounts::new(400, 200, 200), 1..=9, alloc::vec![Rendering::Digits], all_ops),
            Protocol::Operations => (SplitCounts::new(635, 315, 315), 1..=9, alloc::vec![Rendering::Digits], all_ops),
            Protocol::TwoOpFormulae => (SplitCounts::new(40, 40, 40), 1..=9, alloc::vec![Rendering::Digits], all_ops),
            Protocol::OpCount => (SplitCounts::new(700, 210, 210), 1..=7, alloc::vec![Rendering::Digits], all_ops),
            Protocol::Grid => (SplitCounts::new(0, 0, 24), 1..=9, Rendering::ALL.to_vec(), all_ops),
        };
        DatasetSpec {
            protocol,
            seed,
            counts,
            digits,
            renderings,
            operations,
            templates: None,
            spelling: Spelling::Corrected,
        }
    }

    /// Spec for experiment 1–5. Experiment 4 maps to its single-op part.
    pub fn experiment(id: u8, seed: u64) -> Result<Self, GenError> {
        let protocol = match id {
            1 => Protocol::DigitCount,
            2 => Protocol::Rendering,
            3 => Protocol::Formats,
            4 => Protocol::Operations,
            5 => Protocol::OpCount,
            _ => return Err(GenError::InvalidSpec(format!("unknown experiment {id}"))),
        };
        Ok(Self::for_protocol(protocol, seed))
    }

    pub fn validate(&self) -> Result<(), GenError> {
        let bad = |m: &str| Err(GenError::InvalidSpec(m.into()));
        if self.digits.is_empty() || *self.digits.start() < 1 || *self.digits.end() > 9 {
            return bad("digit range must be a non-empty subrange of 1..=9");
        }
        if self.renderings.is_empty() {
            return bad("no renderings selected");
        }
        if self.operations.is_empty() {
            return bad("no operations selected");
        }
        if self.counts.test == 0 {
            return bad("test count must be positive");
        }
        let needs_train = !matches!(self.protocol, Protocol::Grid);
        if needs_train && self.counts.train == 0 {
            return bad("train count must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dataset {
    pub spec: DatasetSpec,
    pub examples: Vec<Example>,
}

impl Dataset {
    pub fn split(&self, split: Split) -> impl Iterator<Item = &Example> {
        self.examples.iter().filter(move |e| e.meta.split == split)
    }

    pub fn counts(&self) -> SplitCounts {
        let n = |s| self.split(s).count();
        SplitCounts::new(n(Split::Train), n(Split::Dev), n(Split::Test))
    }

    /// Hex SHA-256 over the examples' id, split, text, formula and answer.
    pub fn content_hash(&self) -> String {
        let mut h = Sha256::new();
        for e in &self.examples {
            let line = format!("{}\t{}\t{}\t{}\t{}\n", e.id, e.meta.split, e.text, e.gold_expr, e.gold_answer);
            h.update(line.as_bytes());
        }
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Uniform operands with `digit_count` digits each (1..=9 for one digit, so
/// zero never appears), resampled until no divisor evaluates to zero.
pub fn sample_operands<R: Rng + ?Sized>(digit_count: u8, template: &Template, rng: &mut R) -> Vec<u64> {
    let (lo, hi) = digit_bounds(digit_count);
    loop {
        let ops: Vec<u64> = (0..template.slots()).map(|_| rng.gen_range(lo..=hi)).collect();
        let valid = template.shape.fill(&ops).is_some_and(|e| e.evaluate().is_ok());
        if valid {
            return ops;
        }
    }
}

fn digit_bounds(d: u8) -> (u64, u64) {
    let d = d.clamp(1, 9) as u32;
    if d == 1 {
        (1, 9)
    } else {
        (10u64.pow(d - 1), 10u64.pow(d) - 1)
    }
}

fn digit_count(n: u64) -> u8 {
    let mut d = 1;
    let mut v = n / 10;
    while v > 0 {
        d += 1;
        v /= 10;
    }
    d
}

/// Fill `t` with `operands` rendered as `rendering`. The example gets id 0
/// and the test split; the generator assigns both.
pub fn instantiate(t: &Template, operands: &[u64], rendering: Rendering) -> Result<Example, GenError> {
    if operands.len() != t.slots() {
        return Err(GenError::Arity { expected: t.slots(), got: operands.len() });
    }
    let rendered = operands.iter().map(|&v| rendering.render(v)).collect::<Result<Vec<_>, _>>()?;
    let gold_expr = t.shape.fill(operands).expect("arity checked");
    let gold_answer = gold_expr.evaluate().map_err(|e| GenError::Eval(format!("{e}")))?;
    Ok(Example {
        id: 0,
        text: t.fill_text(&rendered),
        meta: ExampleMeta {
            digits: operands.iter().map(|&v| digit_count(v)).collect(),
            template: t.id,
            rendering,
            ops: gold_expr.ops(),
            split: Split::Test,
        },
        gold_expr,
        gold_answer,
    })
}

/// True iff no dev/test gold expression also appears in the train split.
/// Wording is irrelevant: the same tree in two formats counts as overlap.
pub fn check_no_overlap(dataset: &Dataset) -> bool {
    no_overlap(&dataset.examples)
}

pub fn no_overlap(examples: &[Example]) -> bool {
    let train: BTreeSet<&ArithExpr> =
        examples.iter().filter(|e| e.meta.split == Split::Train).map(|e| &e.gold_expr).collect();
    examples.iter().filter(|e| e.meta.split != Split::Train).all(|e| !train.contains(&e.gold_expr))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TwoOpSplit {
    pub train: Vec<TemplateId>,
    pub test: Vec<TemplateId>,
}

/// Random 14/15 partition of the two-op formulae with exactly one
/// bracket-requiring formula on the train side.
pub fn two_op_split<R: Rng + ?Sized>(rng: &mut R) -> TwoOpSplit {
    let all = catalog(2);
    let (mut bracketed, mut free): (Vec<_>, Vec<_>) = all.iter().partition(|t| t.requires_brackets());
    bracketed.shuffle(rng);
    free.shuffle(rng);
    let mut train: Vec<TemplateId> = free[..13].iter().map(|t| t.id).collect();
    train.push(bracketed[0].id);
    train.sort();
    let test = all.iter().map(|t| t.id).filter(|id| !train.contains(id)).collect();
    TwoOpSplit { train, test }
}

/// `n` spread over `k` buckets as evenly as possible, earlier buckets first.
fn spread(n: usize, k: usize) -> impl Iterator<Item = usize> {
    (0..k).map(move |i| n / k + usize::from(i < n % k))
}

pub fn generate(spec: &DatasetSpec) -> Result<Dataset, GenError> {
    spec.validate()?;
    let mut g = Generator::new(spec);
    match spec.protocol {
        Protocol::DigitCount => g.digit_count()?,
        Protocol::Rendering => g.rendering()?,
        Protocol::Formats => g.formats()?,
        Protocol::Operations => g.operations()?,
        Protocol::TwoOpFormulae => g.two_op_formulae()?,
        Protocol::OpCount => g.op_count()?,
        Protocol::Grid => g.grid()?,
    }
    let mut examples = g.examples;
    examples.sort_by_key(|e| e.meta.split);
    for (i, e) in examples.iter_mut().enumerate() {
        e.id = i as u32;
    }
    Ok(Dataset { spec: spec.clone(), examples })
}

const MAX_DRAWS: usize = 200_000;

struct Generator<'a> {
    spec: &'a DatasetSpec,
    rng: ChaCha8Rng,
    used: BTreeSet<ArithExpr>,
    used_per_cell: BTreeMap<(ArithExpr, u8), u64>,
    capacities: BTreeMap<(ArithExpr, u8), u64>,
    examples: Vec<Example>,
}

impl<'a> Generator<'a> {
    fn new(spec: &'a DatasetSpec) -> Self {
        Generator {
            spec,
            rng: ChaCha8Rng::seed_from_u64(spec.seed),
            used: BTreeSet::new(),
            used_per_cell: BTreeMap::new(),
            capacities: BTreeMap::new(),
            examples: Vec::new(),
        }
    }

    fn template(&self, id: TemplateId) -> Template {
        template(id, self.spec.spelling).expect("catalog id")
    }

    fn single(&self, format: u8, op: Op) -> Template {
        self.template(TemplateId::Single { format, op })
    }

    // Number of distinct valid expressions for a shape at digit count d.
    // Exact for one digit; for more digits the unconstrained count, which
    // only overestimates by the rare zero-divisor tuples.
    fn capacity(&mut self, shape: &ArithExpr, d: u8) -> u64 {
        let key = (shape.clone(), d);
        if let Some(&c) = self.capacities.get(&key) {
            return c;
        }
        let slots = shape.leaf_count() as u32;
        let c = if d == 1 {
            let mut count = 0;
            let total = 9u64.pow(slots);
            for idx in 0..total {
                let ops: Vec<u64> = (0..slots).map(|s| (idx / 9u64.pow(s)) % 9 + 1).collect();
                if shape.fill(&ops).is_some_and(|e| e.evaluate().is_ok()) {
                    count += 1;
                }
            }
            count
        } else {
            let (lo, hi) = digit_bounds(d);
            (hi - lo + 1).saturating_pow(slots)
        };
        self.capacities.insert(key, c);
        c
    }

    fn remaining(&mut self, shape: &ArithExpr, d: u8) -> u64 {
        let used = self.used_per_cell.get(&(shape.clone(), d)).copied().unwrap_or(0);
        self.capacity(shape, d).saturating_sub(used)
    }

    fn reset_scope(&mut self) {
        self.used.clear();
        self.used_per_cell.clear();
    }

    fn pick_rendering(&mut self) -> Rendering {
        let r = &self.spec.renderings;
        if r.len() == 1 {
            r[0]
        } else {
            r[self.rng.gen_range(0..r.len())]
        }
    }

    fn push(&mut self, t: &Template, operands: &[u64], rendering: Rendering, split: Split) -> Result<(), GenError> {
        let mut e = instantiate(t, operands, rendering)?;
        e.meta.split = split;
        *self.used_per_cell.entry((t.shape.clone(), digit_count(operands[0]))).or_insert(0) += 1;
        self.examples.push(e);
        Ok(())
    }

    /// One example with a fresh (never used in this scope) expression.
    fn draw(&mut self, t: &Template, d: u8, rendering: Rendering, split: Split) -> Result<(), GenError> {
        if self.remaining(&t.shape, d) == 0 {
            return Err(GenError::Infeasible(format!(
                "no unused {d}-digit expressions left for {}",
                t.formula_label()
            )));
        }
        for _ in 0..MAX_DRAWS {
            let ops = sample_operands(d, t, &mut self.rng);
            let expr = t.shape.fill(&ops).expect("arity");
            if self.used.insert(expr) {
                return self.push(t, &ops, rendering, split);
            }
        }
        Err(GenError::Infeasible(format!("could not find an unused {d}-digit expression for {}", t.formula_label())))
    }

    /// Like `draw`, with the digit count uniform over the non-exhausted
    /// counts in `digits`.
    fn draw_any_digits(&mut self, t: &Template, digits: RangeInclusive<u8>, split: Split) -> Result<(), GenError> {
        let candidates: Vec<u8> = digits.filter(|&d| self.remaining(&t.shape, d) > 0).collect();
        if candidates.is_empty() {
            return Err(GenError::Infeasible(format!("expression space exhausted for {}", t.formula_label())));
        }
        let d = candidates[self.rng.gen_range(0..candidates.len())];
        let rendering = self.pick_rendering();
        self.draw(t, d, rendering, split)
    }

    fn check_fits(&mut self, t: &Template, d: u8, n: usize) -> Result<(), GenError> {
        let left = self.remaining(&t.shape, d);
        if (n as u64) > left {
            return Err(GenError::Infeasible(format!(
                "requested {n} {d}-digit examples of {} but only {left} distinct expressions remain",
                t.formula_label()
            )));
        }
        Ok(())
    }

    fn digit_count(&mut self) -> Result<(), GenError> {
        let spec = self.spec;
        let rendering = spec.renderings[0];
        for &op in &spec.operations {
            let t = self.single(0, op);
            let mut pairs: Vec<[u64; 2]> = (1..=9).flat_map(|x| (1..=9).map(move |y| [x, y])).collect();
            pairs.retain(|p| t.shape.fill(p).is_some_and(|e| e.evaluate().is_ok()));
            if spec.counts.train > pairs.len() {
                return Err(GenError::Infeasible(format!(
                    "{} single-digit training pairs requested, {} exist",
                    spec.counts.train,
                    pairs.len()
                )));
            }
            pairs.shuffle(&mut self.rng);
            for (i, p) in pairs.iter().enumerate() {
                let split = if i < spec.counts.train { Split::Train } else { Split::Test };
                if split == Split::Test && !spec.digits.contains(&1) {
                    break;
                }
                self.used.insert(t.shape.fill(p).expect("arity"));
                self.push(&t, p, rendering, split)?;
            }
            for d in spec.digits.clone().filter(|&d| d > 1) {
                self.check_fits(&t, d, spec.counts.test)?;
                for _ in 0..spec.counts.test {
                    self.draw(&t, d, rendering, Split::Test)?;
                }
            }
        }
        Ok(())
    }

    fn rendering(&mut self) -> Result<(), GenError> {
        let spec = self.spec;
        let renderings = spec.renderings.clone();
        for &op in &spec.operations {
            let t = self.single(0, op);
            for d in spec.digits.clone() {
                let requested = spec.counts.train + spec.counts.test;
                let share = (self.remaining(&t.shape, d) / renderings.len() as u64) as usize;
                let (train, test) = if share >= requested {
                    (spec.counts.train, spec.counts.test)
                } else {
                    // Small digit counts: split what exists evenly.
                    (share / 2, share / 2)
                };
                for &r in &renderings {
                    for _ in 0..train {
                        self.draw(&t, d, r, Split::Train)?;
                    }
                    for _ in 0..test {
                        self.draw(&t, d, r, Split::Test)?;
                    }
                }
            }
        }
        Ok(())
    }

    fn formats(&mut self) -> Result<(), GenError> {
        let spec = self.spec;
        let ops = spec.operations.clone();
        let train_digits = 1..=*spec.digits.end();
        for (op, n) in ops.iter().zip(spread(spec.counts.train, ops.len())) {
            let t = self.single(0, *op);
            for _ in 0..n {
                self.draw_any_digits(&t, train_digits.clone(), Split::Train)?;
            }
        }
        for split in [Split::Dev, Split::Test] {
            let per_format = if split == Split::Dev { spec.counts.dev } else { spec.counts.test };
            for format in 0..FORMAT_COUNT {
                for (op, n) in ops.iter().zip(spread(per_format, ops.len())) {
                    let t = self.single(format, *op);
                    for _ in 0..n {
                        self.draw_any_digits(&t, spec.digits.clone(), split)?;
                    }
                }
            }
        }
        Ok(())
    }

    fn operations(&mut self) -> Result<(), GenError> {
        let spec = self.spec;
        for &op in &spec.operations {
            for (split, n) in
                [(Split::Train, spec.counts.train), (Split::Dev, spec.counts.dev), (Split::Test, spec.counts.test)]
            {
                for _ in 0..n {
                    let format = self.rng.gen_range(0..FORMAT_COUNT);
                    let t = self.single(format, op);
                    self.draw_any_digits(&t, spec.digits.clone(), split)?;
                }
            }
        }
        Ok(())
    }

    fn two_op_formulae(&mut self) -> Result<(), GenError> {
        let spec = self.spec;
        for t in catalog_with(2, spec.spelling) {
            for (split, n) in
                [(Split::Train, spec.counts.train), (Split::Dev, spec.counts.dev), (Split::Test, spec.counts.test)]
            {
                for _ in 0..n {
                    self.draw_any_digits(&t, spec.digits.clone(), split)?;
                }
            }
        }
        Ok(())
    }

    fn op_count(&mut self) -> Result<(), GenError> {
        let spec = self.spec;
        let ops = spec.operations.clone();
        for _ in 0..spec.counts.train {
            let op = ops[self.rng.gen_range(0..ops.len())];
            let format = self.rng.gen_range(0..FORMAT_COUNT);
            let t = self.single(format, op);
            self.draw_any_digits(&t, 1..=9, Split::Train)?;
        }
        for split in [Split::Dev, Split::Test] {
            let n = if split == Split::Dev { spec.counts.dev } else { spec.counts.test };
            for &first in &ops {
                for &second in &ops {
                    let id = bracket_free_formula(first, second).id;
                    let t = self.template(id);
                    for _ in 0..n {
                        self.draw_any_digits(&t, spec.digits.clone(), split)?;
                    }
                }
            }
        }
        Ok(())
    }

    fn grid(&mut self) -> Result<(), GenError> {
        let spec = self.spec;
        let templates: Vec<Template> = full_catalog(spec.spelling)
            .into_iter()
            .filter(|t| match &spec.templates {
                Some(ids) => ids.contains(&t.id),
                None => t.arity() == 2 || t.ops().iter().all(|op| spec.operations.contains(op)),
            })
            .collect();
        for t in &templates {
            for &r in &spec.renderings.clone() {
                for d in spec.digits.clone() {
                    self.reset_scope();
                    self.check_fits(t, d, spec.counts.test)?;
                    for _ in 0..spec.counts.test {
                        self.draw(t, d, r, Split::Test)?;
                    }
                }
            }
        }
        Ok(())
    }
}
