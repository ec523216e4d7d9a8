//! Report files and the published-baselines table.
//!
//! Reports are written as Markdown (for reading), CSV (for tools) and JSON
//! (the full report with provenance). [`parse_report_csv`] reads the CSV
//! back; `compare` accepts either CSV or JSON.

use std::path::Path;

use mrkl_core::evalharness::{Cell, EvalReport, LayoutId, Provenance, CSV_HEADER};
use serde::Deserialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("expected header `{CSV_HEADER}`, found `{0}`")]
    Header(String),
    #[error("unknown layout `{0}`")]
    Layout(String),
    #[error("rows mix layouts `{0}` and `{1}`")]
    MixedLayouts(String, String),
    #[error("report has no rows, so its layout is unknown")]
    Empty,
    #[error("no baseline `{label}` for layout `{layout}`")]
    NoBaseline { label: String, layout: String },
}

#[derive(Deserialize)]
struct CsvCell {
    layout: String,
    row: String,
    col: String,
    mean: f64,
    std: f64,
    n: usize,
    runs: usize,
}

pub fn parse_report_csv(text: &str) -> Result<EvalReport, ReportError> {
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let header = reader.headers()?.iter().collect::<Vec<_>>().join(",");
    if header != CSV_HEADER {
        return Err(ReportError::Header(header));
    }
    let mut report: Option<EvalReport> = None;
    for rec in reader.deserialize() {
        let c: CsvCell = rec?;
        let layout = LayoutId::parse(&c.layout).ok_or_else(|| ReportError::Layout(c.layout.clone()))?;
        let r = report.get_or_insert_with(|| {
            let mut r = EvalReport::empty(layout);
            r.cols.clear();
            r
        });
        if r.layout != layout {
            return Err(ReportError::MixedLayouts(r.layout.to_string(), c.layout));
        }
        r.push(Cell { row: c.row, col: c.col, mean: c.mean, std: c.std, n: c.n, runs: c.runs });
    }
    let mut report = report.ok_or(ReportError::Empty)?;
    // Restore the canonical column order; unknown labels keep their place at the end.
    let canonical = report.layout.cols();
    report.cols.sort_by_key(|c| canonical.iter().position(|x| x == c).unwrap_or(usize::MAX));
    Ok(report)
}

/// Reads a report from `.json` (full, with provenance) or CSV.
pub fn load_report(path: &Path) -> Result<EvalReport, ReportError> {
    let text =
        std::fs::read_to_string(path).map_err(|source| ReportError::Io { path: path.display().to_string(), source })?;
    if path.extension().is_some_and(|e| e == "json") {
        Ok(serde_json::from_str(&text)?)
    } else {
        parse_report_csv(&text)
    }
}

const BASELINES_CSV: &str = include_str!("../data/baselines.csv");

#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct Baseline {
    pub layout: String,
    pub label: String,
    pub row: String,
    pub col: String,
    pub mean: f64,
    pub std: Option<f64>,
    pub source: String,
}

/// Published accuracy numbers for learned extractors, bundled with the
/// binary. These are reference rows for display and comparison only.
pub fn baselines() -> Vec<Baseline> {
    csv::Reader::from_reader(BASELINES_CSV.as_bytes())
        .deserialize()
        .collect::<Result<_, _>>()
        .expect("bundled baselines parse")
}

pub fn baseline_labels(layout: LayoutId) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    for b in baselines().into_iter().filter(|b| b.layout == layout.as_str()) {
        if !out.contains(&b.label) {
            out.push(b.label);
        }
    }
    out
}

fn baseline_cells(layout: LayoutId, label: &str) -> Result<Vec<Baseline>, ReportError> {
    let cells: Vec<_> = baselines().into_iter().filter(|b| b.layout == layout.as_str() && b.label == label).collect();
    if cells.is_empty() {
        return Err(ReportError::NoBaseline { label: label.into(), layout: layout.to_string() });
    }
    Ok(cells)
}

fn to_cell(b: &Baseline, row: String) -> Cell {
    Cell { row, col: b.col.clone(), mean: b.mean, std: b.std.unwrap_or(0.0), n: 0, runs: 1 }
}

/// A baseline series as a report of its own, for `compare`.
pub fn baseline_report(layout: LayoutId, label: &str) -> Result<EvalReport, ReportError> {
    let mut report = EvalReport::empty(layout);
    for b in baseline_cells(layout, label)? {
        report.push(to_cell(&b, b.row.clone()));
    }
    report.provenance = Provenance {
        backend: format!("baseline:{label}"),
        notes: vec!["published numbers, not reproduced".into()],
        ..Provenance::default()
    };
    Ok(report)
}

/// Appends a baseline series as extra rows. Rows that clash with an
/// existing row are shown as `row (label)`.
pub fn append_baseline(report: &mut EvalReport, label: &str) -> Result<(), ReportError> {
    let existing = report.rows.clone();
    for b in baseline_cells(report.layout, label)? {
        let row = if existing.contains(&b.row) { format!("{} ({label})", b.row) } else { b.row.clone() };
        report.push(to_cell(&b, row));
    }
    report.provenance.notes.push(format!("rows from baseline `{label}` are published numbers"));
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use mrkl_core::evalharness::{render, run, ExperimentConfig, Style};
    use mrkl_core::extractor::ReferenceExtractor;
    use proptest::prelude::*;

    #[test]
    fn csv_round_trip() {
        let mut cfg = ExperimentConfig::experiment(3, false, 2).unwrap();
        cfg.runs = 2;
        let r = run(&cfg, &ReferenceExtractor::new()).unwrap();
        let back = parse_report_csv(&render(&r, Style::Csv)).unwrap();
        assert_eq!((back.layout, &back.rows, &back.cols, &back.cells), (r.layout, &r.rows, &r.cols, &r.cells));
    }

    proptest! {
        #[test]
        fn csv_floats_round_trip(mean in 0.0f64..=1.0, std in 0.0f64..0.6, n in 0usize..10_000) {
            let mut r = EvalReport::empty(LayoutId::TwoOpFormulae);
            r.push(Cell { row: "f=(A+B*C), odd \"label\"".into(), col: "accuracy".into(), mean, std, n, runs: 3 });
            let back = parse_report_csv(&render(&r, Style::Csv)).unwrap();
            prop_assert_eq!(back.cells, r.cells);
        }
    }

    #[test]
    fn malformed_csv() {
        assert!(matches!(parse_report_csv("a,b\n"), Err(ReportError::Header(_))));
        assert!(matches!(parse_report_csv(&format!("{CSV_HEADER}\n")), Err(ReportError::Empty)));
        let bad = format!("{CSV_HEADER}\nnope,a,b,1,0,1,1\n");
        assert!(matches!(parse_report_csv(&bad), Err(ReportError::Layout(_))));
    }

    #[test]
    fn bundled_baselines() {
        let all = baselines();
        assert!(all.iter().all(|b| LayoutId::parse(&b.layout).is_some() && (0.0..=1.0).contains(&b.mean)));
        let gpt3: Vec<_> = all.iter().filter(|b| b.label == "gpt-3").map(|b| (b.col.as_str(), b.mean)).collect();
        assert_eq!(gpt3, [("2", 1.0), ("3", 0.804), ("4", 0.255), ("5", 0.093)]);
        assert_eq!(baseline_report(LayoutId::TwoOpFormulae, "published").unwrap().rows.len(), 29);
        for layout in LayoutId::ALL {
            assert!(baseline_labels(layout).contains(&"published".to_string()), "{layout}");
        }
        assert!(baseline_report(LayoutId::Renderings, "gpt-3").is_err());
    }

    #[test]
    fn baseline_rows_render_alongside() {
        let mut cfg = ExperimentConfig::experiment(1, false, 7).unwrap();
        cfg.runs = 1;
        let mut r = run(&cfg, &ReferenceExtractor::new()).unwrap();
        append_baseline(&mut r, "gpt-3").unwrap();
        append_baseline(&mut r, "published").unwrap();
        let md = render(&r, Style::Markdown);
        assert!(md.contains("| GPT-3 | N/A | 1.0 | 0.804 | 0.255 | 0.093 | N/A | N/A | N/A | N/A |"), "{md}");
        assert!(md.contains("| Multiplication (published) | 1.0 | 1.0 | 1.0 | 1.0 | 1.0 | 0.98 |"), "{md}");
    }
}
