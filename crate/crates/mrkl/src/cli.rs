//! The `mrkl` command line.
//!
//! Exit codes: 0 success, 1 usage error, 2 runtime error.

use std::ffi::OsString;
use std::io::{BufRead, IsTerminal, Write};
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use mrkl_core::evalharness::{
    compare, render, render_comparison, run, run_dataset, EvalReport, ExperimentConfig, LayoutId, Style,
};
use mrkl_core::experts::{
    Calculator, CurrencyExpert, DatabaseExpert, EchoCompletion, ExpertDescriptor, FallbackExpert, FixedClock, Payload,
    RateTable, RecordStore, StubCompletion,
};
use mrkl_core::extractor::wire::encode_reply;
use mrkl_core::extractor::{ExtractError, Extractor, ReferenceExtractor};
use mrkl_core::router::{Router, RoutingDecision};
use mrkl_core::templates::{generate, DatasetSpec, Protocol, Spelling};
use serde::Serialize;

use crate::backend::{AnyClock, ProcessBackend, SystemClock};
use crate::config::{self, CliConfig, Settings};
use crate::files;
use crate::report;

#[derive(Parser)]
#[command(
    name = "mrkl",
    version,
    about = "Route questions to symbolic experts; generate and score arithmetic-extraction datasets"
)]
struct Cli {
    /// Config file (flat key = value); overrides MRKL_CONFIG.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate a dataset file for an experiment protocol.
    Generate(GenerateArgs),
    /// Score an extractor backend and write accuracy tables.
    Eval(EvalArgs),
    /// Answer a question (or read questions from stdin) through the router.
    Route(RouteArgs),
    /// List the registered experts and their resources.
    Experts(ExpertsArgs),
    /// Per-cell differences between two reports.
    Compare(CompareArgs),
    /// Run the reference extractor as a line-protocol backend on stdin/stdout.
    #[command(hide = true)]
    Serve(ServeArgs),
}

#[derive(Args, Default)]
struct Common {
    /// Confidence threshold for routing, in [0, 1].
    #[arg(long)]
    threshold: Option<f64>,
    /// Exchange-rates file.
    #[arg(long, value_name = "FILE")]
    rates: Option<PathBuf>,
    /// Record-store file.
    #[arg(long, value_name = "FILE")]
    records: Option<PathBuf>,
    /// Extractor backend: reference, digits-only or cmd:<shell command>.
    #[arg(long)]
    backend: Option<String>,
    /// Completion backend for the fallback: stub, echo or cmd:<shell command>.
    #[arg(long)]
    fallback: Option<String>,
    /// Pin today's date (YYYY-MM-DD) instead of reading the system clock.
    #[arg(long, value_name = "DATE")]
    clock: Option<String>,
}

#[derive(Args)]
struct GenerateArgs {
    /// Experiment number.
    #[arg(long, short, value_parser = clap::value_parser!(u8).range(1..=5), required_unless_present = "protocol")]
    experiment: Option<u8>,
    /// With --experiment 4: the two-operation part.
    #[arg(long)]
    two_op: bool,
    /// Protocol by name (digit-count, rendering, formats, operations, two-op-formulae, op-count, grid).
    #[arg(long, conflicts_with = "experiment")]
    protocol: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output file; defaults to <out_dir>/<protocol>-seed<seed>.jsonl.
    #[arg(long, short)]
    out: Option<PathBuf>,
    /// Use the original template spellings, typos included.
    #[arg(long)]
    verbatim: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Markdown,
    Csv,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long, short, value_parser = clap::value_parser!(u8).range(1..=5))]
    experiment: Option<u8>,
    #[arg(long)]
    two_op: bool,
    /// Number of formula splits for --two-op (same as --runs).
    #[arg(long, requires = "two_op")]
    splits: Option<usize>,
    /// Independent runs with consecutive seeds.
    #[arg(long)]
    runs: Option<usize>,
    /// Score this dataset file (a single run).
    #[arg(long, value_name = "FILE")]
    dataset: Option<PathBuf>,
    /// Fail instead of generating a missing --dataset.
    #[arg(long, requires = "dataset")]
    no_generate: bool,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    backend: Option<String>,
    /// Directory for the report files.
    #[arg(long, value_name = "DIR")]
    out_dir: Option<PathBuf>,
    /// Show a published baseline series next to the results (repeatable).
    #[arg(long, value_name = "LABEL")]
    baseline: Vec<String>,
    /// Table printed on stdout.
    #[arg(long, value_enum, default_value = "markdown")]
    format: Format,
}

#[derive(Args)]
struct RouteArgs {
    /// Question; read line by line from stdin when omitted.
    text: Vec<String>,
    /// Also print the score of every expert.
    #[arg(long)]
    trace: bool,
    /// Print the routing decision as one JSON line.
    #[arg(long)]
    json: bool,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct ExpertsArgs {
    #[arg(long)]
    json: bool,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct CompareArgs {
    /// Report file (.csv or .json), or baseline:<label>.
    a: String,
    /// Report file (.csv or .json), or baseline:<label>.
    b: String,
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct ServeArgs {
    /// Do not understand numbers written as words.
    #[arg(long)]
    digits_only: bool,
}

enum Failure {
    Usage(String),
    Runtime(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Runtime(e)
    }
}

impl From<files::FileError> for Failure {
    fn from(e: files::FileError) -> Self {
        Failure::Runtime(e.into())
    }
}

type CmdResult = Result<(), Failure>;

fn usage(msg: impl Into<String>) -> Failure {
    Failure::Usage(msg.into())
}

pub struct Io<'a> {
    pub input: &'a mut dyn BufRead,
    pub out: &'a mut dyn Write,
    pub err: &'a mut dyn Write,
    pub env: &'a dyn Fn(&str) -> Option<String>,
}

/// Runs the CLI and returns the process exit code.
pub fn run_cli<I, T>(args: I, io: Io<'_>) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let text = e.render().to_string();
            let _ = if e.use_stderr() { write!(io.err, "{text}") } else { write!(io.out, "{text}") };
            return code;
        }
    };
    let Io { input, out, err, env } = io;
    let result = dispatch(cli, input, out, err, env);
    let _ = out.flush();
    match result {
        Ok(()) => 0,
        Err(Failure::Usage(m)) => {
            let _ = writeln!(err, "error: {m}");
            1
        }
        Err(Failure::Runtime(e)) => {
            let _ = writeln!(err, "error: {e:#}");
            2
        }
    }
}

fn dispatch(
    cli: Cli,
    input: &mut dyn BufRead,
    out: &mut dyn Write,
    err: &mut dyn Write,
    env: &dyn Fn(&str) -> Option<String>,
) -> CmdResult {
    let flags = |common: &Common| -> Result<Settings, Failure> {
        let mut s = Settings::default();
        let mut set = |k: &str, v: Option<String>| match v {
            Some(v) => s.set("command line", k, &v).map_err(|e| usage(e.to_string())),
            None => Ok(()),
        };
        set("threshold", common.threshold.map(|t| t.to_string()))?;
        set("rates", common.rates.as_ref().map(|p| p.display().to_string()))?;
        set("records", common.records.as_ref().map(|p| p.display().to_string()))?;
        set("backend", common.backend.clone())?;
        set("fallback", common.fallback.clone())?;
        set("clock", common.clock.clone())?;
        Ok(s)
    };
    let load = |s: Settings| config::load(s, cli.config.clone(), env).map_err(|e| Failure::Runtime(e.into()));
    match &cli.command {
        Cmd::Generate(a) => {
            let cfg = load(Settings { seed: a.seed, ..Settings::default() })?;
            cmd_generate(a, &cfg, out)
        }
        Cmd::Eval(a) => {
            let cfg = load(Settings {
                seed: a.seed,
                backend: a.backend.clone(),
                out_dir: a.out_dir.clone(),
                ..Settings::default()
            })?;
            cmd_eval(a, &cfg, out, err)
        }
        Cmd::Route(a) => cmd_route(a, &load(flags(&a.common)?)?, input, out),
        Cmd::Experts(a) => cmd_experts(a, &load(flags(&a.common)?)?, out),
        Cmd::Compare(a) => cmd_compare(a, out),
        Cmd::Serve(a) => cmd_serve(a, input, out),
    }
}

fn protocol_spec(
    experiment: Option<u8>,
    two_op: bool,
    protocol: Option<&str>,
    seed: u64,
) -> Result<DatasetSpec, Failure> {
    if let Some(name) = protocol {
        let p = Protocol::from_name(name).ok_or_else(|| usage(format!("unknown protocol `{name}`")))?;
        return Ok(DatasetSpec::for_protocol(p, seed));
    }
    let id = experiment.ok_or_else(|| usage("--experiment is required"))?;
    if two_op && id != 4 {
        return Err(usage("--two-op applies to experiment 4 only"));
    }
    let cfg = ExperimentConfig::experiment(id, two_op, seed).map_err(|e| usage(e.to_string()))?;
    Ok(cfg.spec)
}

fn stem(spec: &DatasetSpec) -> String {
    match spec.protocol.experiment_number() {
        Some(n) if spec.protocol == Protocol::TwoOpFormulae => format!("exp{n}-two-op-seed{}", spec.seed),
        Some(n) => format!("exp{n}-seed{}", spec.seed),
        None => format!("{}-seed{}", spec.protocol.name(), spec.seed),
    }
}

fn cmd_generate(a: &GenerateArgs, cfg: &CliConfig, out: &mut dyn Write) -> CmdResult {
    let mut spec = protocol_spec(a.experiment, a.two_op, a.protocol.as_deref(), cfg.seed)?;
    if a.verbatim {
        spec.spelling = Spelling::Verbatim;
    }
    let dataset = generate(&spec).context("generation failed")?;
    let path = a.out.clone().unwrap_or_else(|| cfg.out_dir.join(format!("{}.jsonl", stem(&spec))));
    files::save_dataset(&path, &dataset)?;
    let c = dataset.counts();
    writeln!(out, "train={} dev={} test={}", c.train, c.dev, c.test).map_err(anyhow::Error::from)?;
    writeln!(out, "wrote {} ({} examples, sha256 {})", path.display(), dataset.examples.len(), dataset.content_hash())
        .map_err(anyhow::Error::from)?;
    Ok(())
}

type DynExtractor = Box<dyn Extractor + Send + Sync>;

fn build_extractor(spec: &str) -> anyhow::Result<DynExtractor> {
    Ok(match spec {
        "reference" => Box::new(ReferenceExtractor::new()),
        "digits-only" => Box::new(ReferenceExtractor::digits_only()),
        _ => match spec.strip_prefix("cmd:") {
            Some(cmd) if !cmd.trim().is_empty() => Box::new(
                ProcessBackend::spawn(cmd.trim(), cmd.trim())
                    .with_context(|| format!("cannot start backend `{cmd}`"))?,
            ),
            _ => bail!("unknown backend `{spec}` (expected reference, digits-only or cmd:<command>)"),
        },
    })
}

fn build_fallback(spec: &str) -> anyhow::Result<FallbackExpert> {
    Ok(match spec {
        "stub" => FallbackExpert::new(StubCompletion),
        "echo" => FallbackExpert::new(EchoCompletion),
        _ => match spec.strip_prefix("cmd:") {
            Some(cmd) if !cmd.trim().is_empty() => FallbackExpert::new(
                ProcessBackend::spawn(cmd.trim(), cmd.trim())
                    .with_context(|| format!("cannot start fallback `{cmd}`"))?,
            ),
            _ => bail!("unknown fallback `{spec}` (expected stub, echo or cmd:<command>)"),
        },
    })
}

fn cmd_eval(a: &EvalArgs, cfg: &CliConfig, out: &mut dyn Write, err: &mut dyn Write) -> CmdResult {
    if a.dataset.is_none() && a.experiment.is_none() {
        return Err(usage("either --experiment or --dataset is required"));
    }
    let backend = build_extractor(&cfg.backend).map_err(setup_failure)?;
    // Probe once so an unreachable backend fails fast.
    if let Err(ExtractError::Transport(e)) = backend.extract("How much is 1 plus 1?") {
        return Err(Failure::Runtime(anyhow!("backend unreachable: {e}")));
    }
    let report = match &a.dataset {
        Some(path) => {
            if !path.exists() {
                if a.no_generate {
                    return Err(Failure::Runtime(anyhow!("dataset {} not found", path.display())));
                }
                let spec = protocol_spec(a.experiment, a.two_op, None, cfg.seed)?;
                files::save_dataset(path, &generate(&spec).context("generation failed")?)?;
            }
            let dataset = files::load_dataset(path)?;
            run_dataset(&dataset, &backend).context("evaluation failed")?
        }
        None => {
            let id = a.experiment.expect("checked above");
            let mut config = ExperimentConfig::experiment(id, a.two_op, cfg.seed).map_err(|e| usage(e.to_string()))?;
            if let Some(n) = a.runs.or(a.splits) {
                if n == 0 {
                    return Err(usage("--runs must be at least 1"));
                }
                config.runs = n;
            }
            run(&config, &backend).context("evaluation failed")?
        }
    };
    let name = match (&a.dataset, a.experiment) {
        (Some(p), _) => p.file_stem().map_or("dataset".into(), |s| s.to_string_lossy().into_owned()),
        (None, Some(id)) if a.two_op => format!("exp{id}-two-op"),
        (None, Some(id)) => format!("exp{id}"),
        (None, None) => unreachable!(),
    };
    let base = cfg.out_dir.join(format!("{name}-{}", sanitize(backend.name())));
    let mut shown = report.clone();
    for label in &a.baseline {
        report::append_baseline(&mut shown, label).map_err(|e| usage(e.to_string()))?;
    }
    write_reports(&base, &report, &shown)?;
    let table = match a.format {
        Format::Markdown => render(&shown, Style::Markdown),
        Format::Csv => render(&report, Style::Csv),
    };
    write!(out, "{table}").map_err(anyhow::Error::from)?;
    let p = &report.provenance;
    writeln!(
        err,
        "backend {}; seeds {:?}; {} no-parse, {} transport errors; reports at {}.{{md,csv,json}}",
        p.backend,
        p.seeds,
        p.no_parse,
        p.transport_errors,
        base.display()
    )
    .map_err(anyhow::Error::from)?;
    if p.transport_errors > 0 {
        return Err(Failure::Runtime(anyhow!("{} examples failed with transport errors", p.transport_errors)));
    }
    Ok(())
}

fn sanitize(name: &str) -> String {
    let s: String = name.chars().map(|c| if c.is_ascii_alphanumeric() || c == '-' { c } else { '_' }).collect();
    s.chars().take(40).collect()
}

fn write_reports(base: &Path, report: &EvalReport, shown: &EvalReport) -> anyhow::Result<()> {
    if let Some(dir) = base.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    }
    let with = |ext: &str| PathBuf::from(format!("{}.{ext}", base.display()));
    std::fs::write(with("md"), render(shown, Style::Markdown))?;
    std::fs::write(with("csv"), render(report, Style::Csv))?;
    std::fs::write(with("json"), serde_json::to_string_pretty(report)? + "\n")?;
    Ok(())
}

#[derive(Serialize)]
struct ExpertStatus {
    #[serde(flatten)]
    descriptor: ExpertDescriptor,
    resource: String,
    status: &'static str,
}

struct Assembled {
    router: Router,
    statuses: Vec<(String, &'static str, String)>,
}

/// Calculator, date, currency, database and fallback, in that order.
/// Missing resource files leave the expert registered with empty data.
fn assemble(cfg: &CliConfig) -> anyhow::Result<Assembled> {
    let mut statuses = Vec::new();
    let extractor = build_extractor(&cfg.backend)?;
    statuses.push(("calculator".to_string(), "ok", format!("extractor {}", extractor.name())));
    let clock = match cfg.clock {
        Some(d) => {
            statuses.push(("date".into(), "ok", format!("fixed clock {d}")));
            AnyClock::Fixed(FixedClock(d))
        }
        None => {
            statuses.push(("date".into(), "ok", "system clock".into()));
            AnyClock::System(SystemClock)
        }
    };
    let rates = match &cfg.rates {
        None => {
            statuses.push(("currency".into(), "none", "no rates file configured".into()));
            RateTable::default()
        }
        Some(p) if !p.exists() => {
            log::warn!("rates file {} not found; currency expert has no rates", p.display());
            statuses.push(("currency".into(), "missing", format!("{} not found", p.display())));
            RateTable::default()
        }
        Some(p) => {
            let t = files::load_rates(p)?;
            statuses.push((
                "currency".into(),
                "ok",
                format!("{} rates as of {} from {}", t.len(), t.timestamp, p.display()),
            ));
            t
        }
    };
    let store = match &cfg.records {
        None => {
            statuses.push(("database".into(), "none", "no records file configured".into()));
            RecordStore::new("empty")
        }
        Some(p) if !p.exists() => {
            log::warn!("records file {} not found; database expert has no records", p.display());
            statuses.push(("database".into(), "missing", format!("{} not found", p.display())));
            RecordStore::new("empty")
        }
        Some(p) => {
            let s = files::load_records(p)?;
            statuses.push((
                "database".into(),
                "ok",
                format!("store `{}` with {} records from {}", s.name, s.len(), p.display()),
            ));
            s
        }
    };
    let fallback = build_fallback(&cfg.fallback)?;
    statuses.push(("fallback".into(), "ok", format!("completion backend {}", fallback.backend_name())));

    let mut router = Router::new(fallback).with_threshold(cfg.threshold)?;
    router.register(Calculator::new(extractor))?;
    router.register(mrkl_core::experts::DateExpert::new(clock))?;
    router.register(CurrencyExpert::new(rates))?;
    router.register(DatabaseExpert::new(store))?;
    Ok(Assembled { router, statuses })
}

fn print_decision(d: &RoutingDecision, trace: bool, json: bool, out: &mut dyn Write) -> anyhow::Result<()> {
    if json {
        writeln!(out, "{}", serde_json::to_string(d)?)?;
        return Ok(());
    }
    writeln!(out, "{}", d.response.answer_text)?;
    writeln!(out, "expert: {}", d.chosen)?;
    writeln!(out, "rationale: {}", d.response.rationale)?;
    if trace {
        let scores: Vec<String> = d.scores.iter().map(|(n, s)| format!("{n}={s}")).collect();
        writeln!(out, "scores: {}", scores.join(" "))?;
        for f in &d.errors {
            writeln!(out, "error from {}: {}", f.expert, f.error)?;
        }
    }
    Ok(())
}

fn cmd_route(a: &RouteArgs, cfg: &CliConfig, input: &mut dyn BufRead, out: &mut dyn Write) -> CmdResult {
    let Assembled { router, .. } = assemble(cfg).map_err(setup_failure)?;
    if !a.text.is_empty() {
        let d = router.route(&a.text.join(" "));
        print_decision(&d, a.trace, a.json, out)?;
        if let Payload::Error { message } = &d.response.payload {
            if d.used_fallback {
                return Err(Failure::Runtime(anyhow!("fallback failed: {message}")));
            }
        }
        return Ok(());
    }
    let interactive = std::io::stdin().is_terminal();
    loop {
        if interactive {
            write!(out, "> ").and_then(|_| out.flush()).map_err(anyhow::Error::from)?;
        }
        let mut line = String::new();
        if input.read_line(&mut line).map_err(anyhow::Error::from)? == 0 {
            break;
        }
        let q = line.trim();
        if q.is_empty() {
            continue;
        }
        print_decision(&router.route(q), a.trace, a.json, out)?;
        if !a.json {
            writeln!(out).map_err(anyhow::Error::from)?;
        }
    }
    Ok(())
}

fn cmd_experts(a: &ExpertsArgs, cfg: &CliConfig, out: &mut dyn Write) -> CmdResult {
    let Assembled { router, statuses } = assemble(cfg).map_err(setup_failure)?;
    let list: Vec<ExpertStatus> = router
        .descriptors()
        .into_iter()
        .map(|descriptor| {
            let (_, status, resource) =
                statuses.iter().find(|(n, _, _)| *n == descriptor.name).cloned().unwrap_or_default();
            ExpertStatus { descriptor, resource, status }
        })
        .collect();
    if a.json {
        writeln!(out, "{}", serde_json::to_string_pretty(&list).map_err(anyhow::Error::from)?)
            .map_err(anyhow::Error::from)?;
        return Ok(());
    }
    for e in &list {
        let kind = match e.descriptor.kind {
            mrkl_core::experts::ExpertKind::Symbolic => "symbolic",
            mrkl_core::experts::ExpertKind::NeuralProxy => "neural-proxy",
        };
        writeln!(out, "{:<11} {:<13} {:<8} {}", e.descriptor.name, kind, e.status, e.resource)
            .map_err(anyhow::Error::from)?;
        writeln!(out, "{:<11} {}", "", e.descriptor.description).map_err(anyhow::Error::from)?;
    }
    writeln!(out, "threshold {}", router.threshold()).map_err(anyhow::Error::from)?;
    Ok(())
}

fn cmd_compare(a: &CompareArgs, out: &mut dyn Write) -> CmdResult {
    let label = |s: &str| s.strip_prefix("baseline:").map(str::to_string);
    let load = |s: &str| {
        report::load_report(Path::new(s)).map_err(|e| match e {
            report::ReportError::Io { .. } => Failure::Runtime(e.into()),
            _ => Failure::Runtime(anyhow!("{s}: {e}")),
        })
    };
    let (ra, rb) = match (label(&a.a), label(&a.b)) {
        (Some(_), Some(_)) => return Err(usage("at most one side can be a baseline")),
        (Some(l), None) => {
            let rb = load(&a.b)?;
            (report::baseline_report(rb.layout, &l).map_err(|e| usage(e.to_string()))?, rb)
        }
        (None, Some(l)) => {
            let ra = load(&a.a)?;
            let rb = report::baseline_report(ra.layout, &l).map_err(|e| usage(e.to_string()))?;
            (ra, rb)
        }
        (None, None) => (load(&a.a)?, load(&a.b)?),
    };
    let cmp = compare(&ra, &rb).map_err(|e| Failure::Runtime(e.into()))?;
    let text = if a.json {
        serde_json::to_string_pretty(&cmp).map_err(anyhow::Error::from)? + "\n"
    } else {
        render_comparison(&cmp)
    };
    write!(out, "{text}").map_err(anyhow::Error::from)?;
    Ok(())
}

fn cmd_serve(a: &ServeArgs, input: &mut dyn BufRead, out: &mut dyn Write) -> CmdResult {
    let x = if a.digits_only { ReferenceExtractor::digits_only() } else { ReferenceExtractor::new() };
    let mut line = String::new();
    loop {
        line.clear();
        if input.read_line(&mut line).map_err(anyhow::Error::from)? == 0 {
            return Ok(());
        }
        writeln!(out, "{}", encode_reply(&x.parse(line.trim_end_matches(['\n', '\r']))))
            .and_then(|_| out.flush())
            .map_err(anyhow::Error::from)?;
    }
}

/// Bad backend names and thresholds are usage errors; anything else raised
/// while assembling (unreadable files, a backend that will not start) is a
/// runtime error.
fn setup_failure(e: anyhow::Error) -> Failure {
    let text = format!("{e:#}");
    if text.starts_with("unknown backend") || text.starts_with("unknown fallback") || text.contains("threshold") {
        Failure::Usage(text)
    } else {
        Failure::Runtime(e)
    }
}

/// Layout names accepted by `compare` (for help texts and tests).
pub fn layouts() -> Vec<&'static str> {
    LayoutId::ALL.iter().map(|l| l.as_str()).collect()
}
