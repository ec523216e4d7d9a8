//! Line-oriented file formats: datasets, exchange rates and record stores.
//!
//! Every file is JSON Lines. The first line is a header object with a
//! `format` name and a `version`; each following non-blank line is one
//! record.
//!
//! ```text
//! {"format":"mrkl-dataset","version":1,"protocol":"digit-count","seed":7,...}
//! {"id":0,"text":"How much is 3 plus 4?","formula":"(3+4)","answer":"7","digits":[1,1],...}
//!
//! {"format":"mrkl-rates","version":1,"timestamp":"2022-05-01T00:00:00Z"}
//! {"from":"USD","to":"MAD","rate":"10.0"}
//!
//! {"format":"mrkl-records","version":1,"store":"clients"}
//! {"key":"acme","fields":{"name":"Acme Corp","city":"Springfield"}}
//! ```

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use mrkl_core::arithmetic::{parse_calculator_call, ExactNumber, Op};
use mrkl_core::experts::{RateTable, RecordStore};
use mrkl_core::numword::Rendering;
use mrkl_core::templates::{
    Dataset, DatasetSpec, Example, ExampleMeta, Protocol, Spelling, Split, SplitCounts, TemplateId,
};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const DATASET_FORMAT: &str = "mrkl-dataset";
pub const RATES_FORMAT: &str = "mrkl-rates";
pub const RECORDS_FORMAT: &str = "mrkl-records";
pub const VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum FileError {
    #[error("{path}: {source}")]
    Open { path: String, source: io::Error },
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("not a {expected} file (format `{found}`)")]
    WrongFormat { expected: &'static str, found: String },
    #[error("unsupported {format} version {version} (this build reads version {VERSION})")]
    Version { format: &'static str, version: u32 },
    #[error("empty file: missing header line")]
    MissingHeader,
    #[error("content hash mismatch: header says {expected}, records hash to {actual}")]
    HashMismatch { expected: String, actual: String },
}

fn syntax(line: usize, message: impl Into<String>) -> FileError {
    FileError::Syntax { line, message: message.into() }
}

#[derive(Deserialize)]
struct Envelope {
    format: String,
    version: u32,
}

/// Numbered non-blank lines, header checked and returned parsed.
fn read_lines<H: DeserializeOwned, R: BufRead>(
    reader: R,
    format: &'static str,
) -> Result<(H, Vec<(usize, String)>), FileError> {
    let mut lines = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if !line.trim().is_empty() {
            lines.push((i + 1, line));
        }
    }
    let mut it = lines.into_iter();
    let (n, first) = it.next().ok_or(FileError::MissingHeader)?;
    let env: Envelope = serde_json::from_str(&first).map_err(|e| syntax(n, format!("bad header: {e}")))?;
    if env.format != format {
        return Err(FileError::WrongFormat { expected: format, found: env.format });
    }
    if env.version != VERSION {
        return Err(FileError::Version { format, version: env.version });
    }
    let header = serde_json::from_str(&first).map_err(|e| syntax(n, format!("bad header: {e}")))?;
    Ok((header, it.collect()))
}

fn parse_record<T: DeserializeOwned>(line: usize, text: &str) -> Result<T, FileError> {
    serde_json::from_str(text).map_err(|e| syntax(line, e.to_string()))
}

fn open(path: &Path) -> Result<BufReader<File>, FileError> {
    File::open(path).map(BufReader::new).map_err(|source| FileError::Open { path: path.display().to_string(), source })
}

fn create(path: &Path) -> Result<BufWriter<File>, FileError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|source| FileError::Open { path: dir.display().to_string(), source })?;
    }
    File::create(path)
        .map(BufWriter::new)
        .map_err(|source| FileError::Open { path: path.display().to_string(), source })
}

#[derive(Debug, Serialize, Deserialize)]
struct DatasetHeader {
    format: String,
    version: u32,
    protocol: String,
    seed: u64,
    counts: Counts,
    digits: [u8; 2],
    renderings: Vec<String>,
    operations: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    templates: Option<Vec<String>>,
    spelling: String,
    examples: usize,
    content_hash: String,
}

#[derive(Debug, Serialize, Deserialize)]
struct Counts {
    train: usize,
    dev: usize,
    test: usize,
}

/// One dataset example as stored on disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetRecord {
    pub id: u32,
    pub text: String,
    /// Calculator call of the gold expression.
    pub formula: String,
    pub answer: String,
    pub digits: Vec<u8>,
    pub format_id: String,
    pub rendering: String,
    pub ops: Vec<String>,
    pub split: String,
}

impl From<&Example> for DatasetRecord {
    fn from(e: &Example) -> Self {
        DatasetRecord {
            id: e.id,
            text: e.text.clone(),
            formula: e.gold_expr.to_calculator_call(),
            answer: e.gold_answer.to_string(),
            digits: e.meta.digits.clone(),
            format_id: e.meta.template.to_string(),
            rendering: e.meta.rendering.as_str().to_string(),
            ops: e.meta.ops.iter().map(|o| o.name().to_string()).collect(),
            split: e.meta.split.as_str().to_string(),
        }
    }
}

impl DatasetRecord {
    /// Rebuilds the example, checking that the formula evaluates to the
    /// stated answer.
    pub fn to_example(&self) -> Result<Example, String> {
        let gold_expr = parse_calculator_call(&self.formula).map_err(|e| format!("formula: {e}"))?;
        let gold_answer = ExactNumber::parse(&self.answer).map_err(|e| e.to_string())?;
        match gold_expr.evaluate() {
            Ok(v) if v == gold_answer => {}
            Ok(v) => return Err(format!("formula {} evaluates to {v}, not {gold_answer}", self.formula)),
            Err(e) => return Err(e.to_string()),
        }
        let template =
            TemplateId::parse(&self.format_id).ok_or_else(|| format!("unknown format_id `{}`", self.format_id))?;
        let rendering =
            Rendering::parse(&self.rendering).ok_or_else(|| format!("unknown rendering `{}`", self.rendering))?;
        let split = Split::parse(&self.split).ok_or_else(|| format!("unknown split `{}`", self.split))?;
        let ops = self
            .ops
            .iter()
            .map(|o| Op::from_name(o).ok_or_else(|| format!("unknown op `{o}`")))
            .collect::<Result<Vec<_>, _>>()?;
        if ops != gold_expr.ops() {
            return Err(format!("ops {:?} do not match formula {}", self.ops, self.formula));
        }
        Ok(Example {
            id: self.id,
            text: self.text.clone(),
            gold_expr,
            gold_answer,
            meta: ExampleMeta { digits: self.digits.clone(), template, rendering, ops, split },
        })
    }
}

pub fn write_dataset<W: Write>(mut w: W, dataset: &Dataset) -> Result<(), FileError> {
    let spec = &dataset.spec;
    let header = DatasetHeader {
        format: DATASET_FORMAT.into(),
        version: VERSION,
        protocol: spec.protocol.name().into(),
        seed: spec.seed,
        counts: Counts { train: spec.counts.train, dev: spec.counts.dev, test: spec.counts.test },
        digits: [*spec.digits.start(), *spec.digits.end()],
        renderings: spec.renderings.iter().map(|r| r.as_str().to_string()).collect(),
        operations: spec.operations.iter().map(|o| o.name().to_string()).collect(),
        templates: spec.templates.as_ref().map(|ts| ts.iter().map(|t| t.to_string()).collect()),
        spelling: spec.spelling.as_str().into(),
        examples: dataset.examples.len(),
        content_hash: dataset.content_hash(),
    };
    writeln!(w, "{}", serde_json::to_string(&header).expect("header serializes"))?;
    for e in &dataset.examples {
        writeln!(w, "{}", serde_json::to_string(&DatasetRecord::from(e)).expect("record serializes"))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_dataset<R: BufRead>(reader: R) -> Result<Dataset, FileError> {
    let (h, lines): (DatasetHeader, _) = read_lines(reader, DATASET_FORMAT)?;
    let bad = |m: String| syntax(1, m);
    let protocol = Protocol::from_name(&h.protocol).ok_or_else(|| bad(format!("unknown protocol `{}`", h.protocol)))?;
    let renderings = h
        .renderings
        .iter()
        .map(|r| Rendering::parse(r).ok_or_else(|| bad(format!("unknown rendering `{r}`"))))
        .collect::<Result<_, _>>()?;
    let operations = h
        .operations
        .iter()
        .map(|o| Op::from_name(o).ok_or_else(|| bad(format!("unknown op `{o}`"))))
        .collect::<Result<_, _>>()?;
    let templates = match &h.templates {
        None => None,
        Some(ts) => Some(
            ts.iter()
                .map(|t| TemplateId::parse(t).ok_or_else(|| bad(format!("unknown template `{t}`"))))
                .collect::<Result<_, _>>()?,
        ),
    };
    let spelling = Spelling::parse(&h.spelling).ok_or_else(|| bad(format!("unknown spelling `{}`", h.spelling)))?;
    let spec = DatasetSpec {
        protocol,
        seed: h.seed,
        counts: SplitCounts::new(h.counts.train, h.counts.dev, h.counts.test),
        digits: h.digits[0]..=h.digits[1],
        renderings,
        operations,
        templates,
        spelling,
    };
    let mut examples = Vec::with_capacity(lines.len());
    for (n, line) in lines {
        let record: DatasetRecord = parse_record(n, &line)?;
        examples.push(record.to_example().map_err(|m| syntax(n, m))?);
    }
    if examples.len() != h.examples {
        return Err(syntax(1, format!("header announces {} examples, found {}", h.examples, examples.len())));
    }
    let dataset = Dataset { spec, examples };
    let actual = dataset.content_hash();
    if actual != h.content_hash {
        return Err(FileError::HashMismatch { expected: h.content_hash, actual });
    }
    Ok(dataset)
}

pub fn save_dataset(path: &Path, dataset: &Dataset) -> Result<(), FileError> {
    write_dataset(create(path)?, dataset)
}

pub fn load_dataset(path: &Path) -> Result<Dataset, FileError> {
    read_dataset(open(path)?)
}

#[derive(Serialize, Deserialize)]
struct RatesHeader {
    format: String,
    version: u32,
    timestamp: String,
}

#[derive(Serialize, Deserialize)]
struct RateRecord {
    from: String,
    to: String,
    rate: String,
}

pub fn read_rates<R: BufRead>(reader: R) -> Result<RateTable, FileError> {
    let (h, lines): (RatesHeader, _) = read_lines(reader, RATES_FORMAT)?;
    let mut table = RateTable::new(&h.timestamp);
    for (n, line) in lines {
        let r: RateRecord = parse_record(n, &line)?;
        let rate = ExactNumber::parse(&r.rate).map_err(|e| syntax(n, e.to_string()))?;
        if rate.is_zero() || rate < ExactNumber::zero() {
            return Err(syntax(n, format!("rate must be positive, got {}", r.rate)));
        }
        for code in [&r.from, &r.to] {
            if code.len() != 3 || !code.bytes().all(|b| b.is_ascii_alphabetic()) {
                return Err(syntax(n, format!("`{code}` is not a three-letter currency code")));
            }
        }
        table.insert(&r.from, &r.to, rate);
    }
    Ok(table)
}

pub fn write_rates<W: Write>(mut w: W, table: &RateTable) -> Result<(), FileError> {
    let header = RatesHeader { format: RATES_FORMAT.into(), version: VERSION, timestamp: table.timestamp.clone() };
    writeln!(w, "{}", serde_json::to_string(&header).expect("header serializes"))?;
    for (from, to, rate) in table.iter() {
        let r = RateRecord { from: from.into(), to: to.into(), rate: rate.to_string() };
        writeln!(w, "{}", serde_json::to_string(&r).expect("record serializes"))?;
    }
    w.flush()?;
    Ok(())
}

pub fn load_rates(path: &Path) -> Result<RateTable, FileError> {
    read_rates(open(path)?)
}

#[derive(Serialize, Deserialize)]
struct RecordsHeader {
    format: String,
    version: u32,
    store: String,
}

#[derive(Serialize, Deserialize)]
struct RecordLine {
    key: String,
    fields: BTreeMap<String, String>,
}

pub fn read_records<R: BufRead>(reader: R) -> Result<RecordStore, FileError> {
    let (h, lines): (RecordsHeader, _) = read_lines(reader, RECORDS_FORMAT)?;
    let mut store = RecordStore::new(&h.store);
    for (n, line) in lines {
        let r: RecordLine = parse_record(n, &line)?;
        if r.key.trim().is_empty() {
            return Err(syntax(n, "empty key"));
        }
        if store.get(&r.key).is_some() {
            return Err(syntax(n, format!("duplicate key `{}`", r.key)));
        }
        store.insert(r.key.trim(), r.fields);
    }
    Ok(store)
}

pub fn load_records(path: &Path) -> Result<RecordStore, FileError> {
    read_records(open(path)?)
}
