//! Accuracy evaluation of extractor backends.
//!
//! A run generates a dataset, asks the backend for the calculator call of
//! every test example, and scores it by exact evaluation against the gold
//! answer. Results are sliced into one of six fixed table layouts, averaged
//! over runs (sample standard deviation), and rendered as Markdown or CSV.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt::Write as _;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::arithmetic::Op;
use crate::extractor::{ExtractError, Extractor};
use crate::numword::Rendering;
use crate::templates::{
    catalog, generate, two_op_split, Dataset, DatasetSpec, Example, GenError, Protocol, Split, TemplateId, FORMAT_COUNT,
};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Generation(#[from] GenError),
    #[error("layout mismatch: {0} vs {1}")]
    LayoutMismatch(String, String),
    #[error("invalid config: {0}")]
    InvalidConfig(String),
}

/// Table shapes, one per experiment table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LayoutId {
    /// Operation rows by digit-count columns 1..=9.
    Digits,
    /// Train rendering by test rendering.
    Renderings,
    /// Format rows by operation columns.
    Formats,
    /// Train operation by test operation.
    Operations,
    /// One row per two-operation formula.
    TwoOpFormulae,
    /// First operation by second operation, bracket-free formulae only.
    OpPairs,
}

const OP_LONG: [&str; 4] = ["Addition", "Subtraction", "Multiplication", "Division"];
const RENDERING_LABELS: [&str; 2] = ["Digits", "Words"];
pub const TWO_OP_COLUMN: &str = "accuracy";

impl LayoutId {
    pub const ALL: [LayoutId; 6] = [
        LayoutId::Digits,
        LayoutId::Renderings,
        LayoutId::Formats,
        LayoutId::Operations,
        LayoutId::TwoOpFormulae,
        LayoutId::OpPairs,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            LayoutId::Digits => "digits",
            LayoutId::Renderings => "renderings",
            LayoutId::Formats => "formats",
            LayoutId::Operations => "operations",
            LayoutId::TwoOpFormulae => "two-op-formulae",
            LayoutId::OpPairs => "op-pairs",
        }
    }

    pub fn parse(s: &str) -> Option<LayoutId> {
        Self::ALL.into_iter().find(|l| l.as_str() == s)
    }

    pub fn for_protocol(p: Protocol) -> Option<LayoutId> {
        Some(match p {
            Protocol::DigitCount => LayoutId::Digits,
            Protocol::Rendering => LayoutId::Renderings,
            Protocol::Formats => LayoutId::Formats,
            Protocol::Operations => LayoutId::Operations,
            Protocol::TwoOpFormulae => LayoutId::TwoOpFormulae,
            Protocol::OpCount => LayoutId::OpPairs,
            Protocol::Grid => return None,
        })
    }

    /// Top-left header cell.
    pub fn corner(self) -> &'static str {
        match self {
            LayoutId::Digits => "Num. digits",
            LayoutId::Renderings | LayoutId::Operations => "Train \\ Test",
            LayoutId::Formats => "Format",
            LayoutId::TwoOpFormulae => "Formula",
            LayoutId::OpPairs => "First \\ Second",
        }
    }

    pub fn rows(self) -> Vec<String> {
        let ops = || Op::ALL.iter().map(|o| o.name().to_string()).collect();
        match self {
            LayoutId::Digits => OP_LONG.iter().map(|s| s.to_string()).collect(),
            LayoutId::Renderings => RENDERING_LABELS.iter().map(|s| s.to_string()).collect(),
            LayoutId::Formats => (0..FORMAT_COUNT).map(|f| format!("format {f}")).collect(),
            LayoutId::Operations | LayoutId::OpPairs => ops(),
            LayoutId::TwoOpFormulae => catalog(2).iter().map(|t| format!("f={}", t.formula_label())).collect(),
        }
    }

    pub fn cols(self) -> Vec<String> {
        match self {
            LayoutId::Digits => (1..=9).map(|d: u8| d.to_string()).collect(),
            LayoutId::Renderings => RENDERING_LABELS.iter().map(|s| s.to_string()).collect(),
            LayoutId::Formats | LayoutId::Operations | LayoutId::OpPairs => {
                Op::ALL.iter().map(|o| o.name().to_string()).collect()
            }
            LayoutId::TwoOpFormulae => vec![TWO_OP_COLUMN.to_string()],
        }
    }

    /// Cells a test example contributes to, as (row, col) indices.
    ///
    /// Train-side dimensions (the rows of the rendering and operation
    /// grids) describe what an external backend was adapted on. They are
    /// recorded, not enforced, so a test example counts toward every row.
    fn cells_for(self, e: &Example) -> Vec<(usize, usize)> {
        let m = &e.meta;
        let rendering = Rendering::ALL.iter().position(|r| *r == m.rendering).unwrap_or(0);
        match (self, m.template, m.ops.as_slice()) {
            (LayoutId::Digits, TemplateId::Single { op, .. }, _) => {
                vec![(op.index(), usize::from(m.max_digits().max(1)) - 1)]
            }
            (LayoutId::Renderings, TemplateId::Single { .. }, _) => {
                (0..RENDERING_LABELS.len()).map(|r| (r, rendering)).collect()
            }
            (LayoutId::Formats, TemplateId::Single { format, op }, _) => vec![(usize::from(format), op.index())],
            (LayoutId::Operations, TemplateId::Single { op, .. }, _) => (0..4).map(|r| (r, op.index())).collect(),
            (LayoutId::TwoOpFormulae, TemplateId::Double { formula }, _) => vec![(usize::from(formula), 0)],
            (LayoutId::OpPairs, TemplateId::Double { .. }, [a, b]) => vec![(a.index(), b.index())],
            _ => Vec::new(),
        }
    }
}

impl core::fmt::Display for LayoutId {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExperimentConfig {
    pub spec: DatasetSpec,
    /// Independent runs, seeded `spec.seed`, `spec.seed + 1`, and so on.
    pub runs: usize,
}

impl ExperimentConfig {
    /// Experiment 1 covers addition and multiplication; the two-op part of
    /// experiment 4 defaults to 10 formula splits; everything else to 3 runs.
    pub fn for_protocol(protocol: Protocol, seed: u64) -> Result<Self, HarnessError> {
        if LayoutId::for_protocol(protocol).is_none() {
            return Err(HarnessError::InvalidConfig(format!("protocol `{}` has no report layout", protocol.name())));
        }
        let mut spec = DatasetSpec::for_protocol(protocol, seed);
        if protocol == Protocol::DigitCount {
            spec.operations = vec![Op::Add, Op::Mul];
        }
        let runs = if protocol == Protocol::TwoOpFormulae { 10 } else { 3 };
        Ok(ExperimentConfig { spec, runs })
    }

    pub fn experiment(id: u8, two_op: bool, seed: u64) -> Result<Self, HarnessError> {
        let protocol = match (id, two_op) {
            (4, true) => Protocol::TwoOpFormulae,
            (_, true) => return Err(HarnessError::InvalidConfig("two-op applies to experiment 4 only".into())),
            _ => DatasetSpec::experiment(id, seed)?.protocol,
        };
        Self::for_protocol(protocol, seed)
    }

    pub fn layout(&self) -> LayoutId {
        LayoutId::for_protocol(self.spec.protocol).expect("checked at construction")
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.runs == 0 {
            return Err(HarnessError::InvalidConfig("runs must be at least 1".into()));
        }
        if LayoutId::for_protocol(self.spec.protocol).is_none() {
            return Err(HarnessError::InvalidConfig(format!(
                "protocol `{}` has no report layout",
                self.spec.protocol.name()
            )));
        }
        Ok(self.spec.validate()?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Correct,
    Wrong,
    NoParse,
    Transport,
}

pub fn score_outcome(example: &Example, backend: &dyn Extractor) -> Outcome {
    match backend.extract(&example.text) {
        Ok(x) => match x.expr.evaluate() {
            Ok(v) if v == example.gold_answer => Outcome::Correct,
            _ => Outcome::Wrong,
        },
        Err(ExtractError::NoParse(_)) => Outcome::NoParse,
        Err(e @ ExtractError::Transport(_)) => {
            log::warn!("example {}: {e}", example.id);
            Outcome::Transport
        }
    }
}

/// True iff the backend's expression evaluates exactly to the gold answer.
pub fn score(example: &Example, backend: &dyn Extractor) -> bool {
    score_outcome(example, backend) == Outcome::Correct
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub row: String,
    pub col: String,
    pub mean: f64,
    pub std: f64,
    /// Examples scored across all runs.
    pub n: usize,
    pub runs: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub protocol: String,
    pub backend: String,
    pub seeds: Vec<u64>,
    pub dataset_hashes: Vec<String>,
    pub transport_errors: usize,
    pub no_parse: usize,
    #[serde(default)]
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub layout: LayoutId,
    pub rows: Vec<String>,
    pub cols: Vec<String>,
    pub cells: Vec<Cell>,
    pub provenance: Provenance,
}

impl EvalReport {
    pub fn empty(layout: LayoutId) -> Self {
        EvalReport {
            layout,
            rows: Vec::new(),
            cols: layout.cols(),
            cells: Vec::new(),
            provenance: Provenance::default(),
        }
    }

    pub fn cell(&self, row: &str, col: &str) -> Option<&Cell> {
        self.cells.iter().find(|c| c.row == row && c.col == col)
    }

    /// Adds a cell, appending its row and column labels if new.
    pub fn push(&mut self, cell: Cell) {
        if !self.rows.contains(&cell.row) {
            self.rows.push(cell.row.clone());
        }
        if !self.cols.contains(&cell.col) {
            self.cols.push(cell.col.clone());
        }
        self.cells.retain(|c| !(c.row == cell.row && c.col == cell.col));
        self.cells.push(cell);
    }

    /// Overall accuracy over every scored example (each example counted once
    /// per cell it lands in).
    pub fn overall(&self) -> Option<f64> {
        let n: usize = self.cells.iter().map(|c| c.n).sum();
        (n > 0).then(|| self.cells.iter().map(|c| c.mean * c.n as f64).sum::<f64>() / n as f64)
    }
}

/// (mean, sample std). A constant series has std exactly 0.
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    match xs {
        [] => (0.0, 0.0),
        [x] => (*x, 0.0),
        [first, rest @ ..] if rest.iter().all(|x| x == first) => (*first, 0.0),
        _ => {
            let k = xs.len() as f64;
            let mean = xs.iter().sum::<f64>() / k;
            let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (k - 1.0);
            (mean, libm::sqrt(var))
        }
    }
}

#[derive(Default)]
struct Accumulator {
    // (row, col) -> per-run accuracies and example count
    cells: BTreeMap<(usize, usize), (Vec<f64>, usize)>,
    transport: usize,
    no_parse: usize,
}

impl Accumulator {
    fn add_run(&mut self, layout: LayoutId, dataset: &Dataset, backend: &dyn Extractor) {
        let mut tally: BTreeMap<(usize, usize), (usize, usize)> = BTreeMap::new();
        for e in dataset.split(Split::Test) {
            let keys = layout.cells_for(e);
            if keys.is_empty() {
                continue;
            }
            let outcome = score_outcome(e, backend);
            match outcome {
                Outcome::Transport => self.transport += 1,
                Outcome::NoParse => self.no_parse += 1,
                _ => {}
            }
            for k in keys {
                let t = tally.entry(k).or_default();
                t.0 += usize::from(outcome == Outcome::Correct);
                t.1 += 1;
            }
        }
        for (k, (correct, total)) in tally {
            let c = self.cells.entry(k).or_default();
            c.0.push(correct as f64 / total as f64);
            c.1 += total;
        }
    }

    fn finish(self, layout: LayoutId, mut provenance: Provenance) -> EvalReport {
        let (row_labels, col_labels) = (layout.rows(), layout.cols());
        let mut report = EvalReport::empty(layout);
        provenance.transport_errors = self.transport;
        provenance.no_parse = self.no_parse;
        report.provenance = provenance;
        let used_rows: Vec<usize> = {
            let mut r: Vec<usize> = self.cells.keys().map(|(r, _)| *r).collect();
            r.dedup();
            r
        };
        report.rows = used_rows.iter().map(|r| row_labels[*r].clone()).collect();
        for ((r, c), (accs, n)) in self.cells {
            let (mean, std) = mean_std(&accs);
            report.cells.push(Cell {
                row: row_labels[r].clone(),
                col: col_labels[c].clone(),
                mean,
                std,
                n,
                runs: accs.len(),
            });
        }
        report
    }
}

pub fn run(config: &ExperimentConfig, backend: &dyn Extractor) -> Result<EvalReport, HarnessError> {
    config.validate()?;
    let layout = config.layout();
    let mut acc = Accumulator::default();
    let mut prov = Provenance {
        protocol: config.spec.protocol.name().to_string(),
        backend: backend.name().to_string(),
        ..Provenance::default()
    };
    for i in 0..config.runs {
        let seed = config.spec.seed.wrapping_add(i as u64);
        let spec = DatasetSpec { seed, ..config.spec.clone() };
        let dataset = generate(&spec)?;
        prov.seeds.push(seed);
        prov.dataset_hashes.push(dataset.content_hash());
        if spec.protocol == Protocol::TwoOpFormulae {
            let split = two_op_split(&mut ChaCha8Rng::seed_from_u64(seed));
            let ids: Vec<String> = split.train.iter().map(|id| format!("{:02}", id.number())).collect();
            prov.notes.push(format!("run {i}: train formulae {}", ids.join(" ")));
        }
        acc.add_run(layout, &dataset, backend);
    }
    Ok(acc.finish(layout, prov))
}

/// Single-run report over an existing dataset.
pub fn run_dataset(dataset: &Dataset, backend: &dyn Extractor) -> Result<EvalReport, HarnessError> {
    let layout = LayoutId::for_protocol(dataset.spec.protocol).ok_or_else(|| {
        HarnessError::InvalidConfig(format!("protocol `{}` has no report layout", dataset.spec.protocol.name()))
    })?;
    let mut acc = Accumulator::default();
    acc.add_run(layout, dataset, backend);
    let prov = Provenance {
        protocol: dataset.spec.protocol.name().to_string(),
        backend: backend.name().to_string(),
        seeds: vec![dataset.spec.seed],
        dataset_hashes: vec![dataset.content_hash()],
        ..Provenance::default()
    };
    Ok(acc.finish(layout, prov))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaCell {
    pub row: String,
    pub col: String,
    pub a: Option<f64>,
    pub b: Option<f64>,
}

impl DeltaCell {
    /// b − a, when both sides have a value.
    pub fn delta(&self) -> Option<f64> {
        Some(self.b? - self.a?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub layout: LayoutId,
    pub a: String,
    pub b: String,
    pub rows: Vec<String>,
    pub cols: Vec<String>,
    pub cells: Vec<DeltaCell>,
}

pub fn compare(a: &EvalReport, b: &EvalReport) -> Result<Comparison, HarnessError> {
    if a.layout != b.layout {
        return Err(HarnessError::LayoutMismatch(a.layout.to_string(), b.layout.to_string()));
    }
    let union = |x: &[String], y: &[String]| {
        let mut out = x.to_vec();
        out.extend(y.iter().filter(|l| !x.contains(l)).cloned());
        out
    };
    let rows = union(&a.rows, &b.rows);
    let cols = union(&a.cols, &b.cols);
    let mut cells = Vec::new();
    for r in &rows {
        for c in &cols {
            let (x, y) = (a.cell(r, c).map(|v| v.mean), b.cell(r, c).map(|v| v.mean));
            if x.is_some() || y.is_some() {
                cells.push(DeltaCell { row: r.clone(), col: c.clone(), a: x, b: y });
            }
        }
    }
    Ok(Comparison {
        layout: a.layout,
        a: a.provenance.backend.clone(),
        b: b.provenance.backend.clone(),
        rows,
        cols,
        cells,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Style {
    Markdown,
    Csv,
}

/// Three decimals, trailing zeros dropped, at least one decimal kept.
pub fn fmt_accuracy(x: f64) -> String {
    let mut s = format!("{x:.3}");
    while s.ends_with('0') && !s.ends_with(".0") {
        s.pop();
    }
    s
}

fn fmt_std(x: f64) -> String {
    if x == 0.0 {
        "0".into()
    } else {
        fmt_accuracy(x)
    }
}

fn fmt_cell(c: &Cell) -> String {
    if c.runs > 1 {
        format!("{} ± {}", fmt_accuracy(c.mean), fmt_std(c.std))
    } else {
        fmt_accuracy(c.mean)
    }
}

fn md_row(out: &mut String, cells: &[String]) {
    out.push('|');
    for c in cells {
        let _ = write!(out, " {c} |");
    }
    out.push('\n');
}

fn md_rule(out: &mut String, n: usize) {
    out.push_str("|---|");
    for _ in 1..n {
        out.push_str("---:|");
    }
    out.push('\n');
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

pub const CSV_HEADER: &str = "layout,row,col,mean,std,n,runs";

pub fn render(report: &EvalReport, style: Style) -> String {
    match style {
        Style::Markdown => render_markdown(report),
        Style::Csv => render_csv(report),
    }
}

fn render_csv(report: &EvalReport) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in &report.rows {
        for c in &report.cols {
            if let Some(cell) = report.cell(r, c) {
                let _ = writeln!(
                    out,
                    "{},{},{},{},{},{},{}",
                    report.layout,
                    csv_field(r),
                    csv_field(c),
                    cell.mean,
                    cell.std,
                    cell.n,
                    cell.runs
                );
            }
        }
    }
    out
}

fn render_markdown(report: &EvalReport) -> String {
    let mut out = String::new();
    if report.layout == LayoutId::TwoOpFormulae {
        md_row(&mut out, &[report.layout.corner().into(), "Mean".into(), "STD".into()]);
        md_rule(&mut out, 3);
        for r in &report.rows {
            match report.cell(r, TWO_OP_COLUMN) {
                Some(c) => md_row(&mut out, &[r.clone(), fmt_accuracy(c.mean), fmt_std(c.std)]),
                None => md_row(&mut out, &[r.clone(), "N/A".into(), "N/A".into()]),
            }
        }
    } else {
        let mut header = vec![report.layout.corner().to_string()];
        header.extend(report.cols.iter().cloned());
        md_row(&mut out, &header);
        md_rule(&mut out, header.len());
        for r in &report.rows {
            let mut line = vec![r.clone()];
            line.extend(report.cols.iter().map(|c| report.cell(r, c).map_or_else(|| "N/A".to_string(), fmt_cell)));
            md_row(&mut out, &line);
        }
    }
    out
}

pub fn render_comparison(cmp: &Comparison) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "a = {}, b = {}; cells show a -> b (b - a)\n", cmp.a, cmp.b);
    let mut header = vec![cmp.layout.corner().to_string()];
    header.extend(cmp.cols.iter().cloned());
    md_row(&mut out, &header);
    md_rule(&mut out, header.len());
    let side = |x: Option<f64>| x.map_or_else(|| "N/A".to_string(), fmt_accuracy);
    for r in &cmp.rows {
        let mut line = vec![r.clone()];
        for c in &cmp.cols {
            let text = match cmp.cells.iter().find(|d| &d.row == r && &d.col == c) {
                None => "N/A".to_string(),
                Some(d) => match d.delta() {
                    Some(delta) => format!("{} -> {} ({delta:+.3})", side(d.a), side(d.b)),
                    None => format!("{} -> {}", side(d.a), side(d.b)),
                },
            };
            line.push(text);
        }
        md_row(&mut out, &line);
    }
    out
}
