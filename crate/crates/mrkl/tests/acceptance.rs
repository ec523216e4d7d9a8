//! Acceptance checks. Each criterion prints one PASS/FAIL line with its
//! wall-clock time; the process exits non-zero if any criterion fails.

use std::collections::BTreeMap;
use std::process::Command;
use std::time::{Duration, Instant};

use mrkl_core::arithmetic::Op;
use mrkl_core::evalharness::{
    compare, render, run, score_outcome, EvalReport, ExperimentConfig, LayoutId, Outcome, Style,
};
use mrkl_core::experts::{
    Calculator, Expert, ExpertDescriptor, ExpertError, ExpertKind, ExpertResponse, FallbackExpert, Handled, Payload,
};
use mrkl_core::extractor::{Extractor, ReferenceExtractor};
use mrkl_core::numword::Rendering;
use mrkl_core::router::Router;
use mrkl_core::templates::{
    catalog_with, check_no_overlap, generate, two_op_split, DatasetSpec, Protocol, Spelling, Split, TemplateId,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Accuracy targets are exact: the reference extractor is deterministic.
const EXACT: f64 = 0.0;

type Verdict = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        let ok: bool = $cond;
        if !ok {
            return Err(format!($($fmt)+));
        }
    };
}

struct Criterion {
    id: u8,
    name: &'static str,
    budget: Duration,
    check: fn() -> Verdict,
}

fn main() {
    let criteria = [
        Criterion { id: 1, name: "catalog fidelity", budget: Duration::from_secs(1), check: catalog_fidelity },
        Criterion { id: 2, name: "split counts", budget: Duration::from_secs(10), check: split_counts },
        Criterion {
            id: 3,
            name: "reference round trip on full grid",
            budget: Duration::from_secs(60),
            check: grid_round_trip,
        },
        Criterion { id: 4, name: "digit generalization", budget: Duration::from_secs(20), check: digit_generalization },
        Criterion {
            id: 5,
            name: "rendering contrast and layouts",
            budget: Duration::from_secs(20),
            check: rendering_and_layouts,
        },
        Criterion { id: 6, name: "overlap audit", budget: Duration::from_secs(10), check: overlap_audit },
        Criterion { id: 7, name: "router invariants", budget: Duration::from_secs(5), check: router_invariants },
        Criterion { id: 8, name: "two-op split protocol", budget: Duration::from_secs(1), check: two_op_splits },
        Criterion { id: 9, name: "end-to-end smoke", budget: Duration::from_secs(20), check: smoke },
    ];
    let mut failed = 0;
    for c in &criteria {
        let start = Instant::now();
        let result = (c.check)();
        let took = start.elapsed();
        let result = match result {
            Ok(detail) if took > c.budget => Err(format!("{detail}; took {took:.2?}, budget {:?}", c.budget)),
            other => other,
        };
        match result {
            Ok(detail) => println!("PASS {} {} ({took:.2?}): {detail}", c.id, c.name),
            Err(why) => {
                failed += 1;
                println!("FAIL {} {} ({took:.2?}): {why}", c.id, c.name);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}

// 1 ------------------------------------------------------------------------

fn catalog_fidelity() -> Verdict {
    let fixture = include_str!("fixtures/catalog_transcription.tsv");
    let mut single = Vec::new();
    let mut double = Vec::new();
    for line in fixture.lines().filter(|l| !l.starts_with('#') && !l.is_empty()) {
        let f: Vec<&str> = line.split('\t').collect();
        ensure!(f.len() == 4, "bad fixture line {line:?}");
        match f[0] {
            "single" => single.push((f[1].parse::<u8>().unwrap(), f[2].to_string(), f[3].to_string())),
            "double" => double.push((f[1].to_string(), f[3].to_string())),
            other => return Err(format!("unknown fixture kind {other}")),
        }
    }
    ensure!(single.len() == 20 && double.len() == 29, "fixture has {}/{} rows", single.len(), double.len());

    let ones = catalog_with(1, Spelling::Verbatim);
    ensure!(ones.len() == 20, "{} single-op templates", ones.len());
    for (format, op, phrasing) in &single {
        let t = ones
            .iter()
            .find(|t| matches!(t.id, TemplateId::Single { format: f, op: o } if f == *format && o.name() == op))
            .ok_or_else(|| format!("no template for format {format} {op}"))?;
        ensure!(t.phrasing == phrasing, "format {format} {op}: {:?} != {phrasing:?}", t.phrasing);
    }

    let twos = catalog_with(2, Spelling::Verbatim);
    ensure!(twos.len() == 29, "{} two-op templates", twos.len());
    for (t, (label, phrasing)) in twos.iter().zip(&double) {
        ensure!(t.formula_label() == label, "formula order: {} != {label}", t.formula_label());
        ensure!(t.phrasing == phrasing, "{label}: {:?} != {phrasing:?}", t.phrasing);
    }
    Ok("20 single-op and 29 two-op phrasings match the transcription".into())
}

// 2 ------------------------------------------------------------------------

fn tally<K: Ord>(it: impl Iterator<Item = K>) -> BTreeMap<K, usize> {
    let mut m = BTreeMap::new();
    for k in it {
        *m.entry(k).or_insert(0) += 1;
    }
    m
}

// Digit runs in the question text, independent of the generator's metadata.
fn text_digit_counts(text: &str) -> Vec<usize> {
    text.split(|c: char| !c.is_ascii_digit()).filter(|s| !s.is_empty()).map(str::len).collect()
}

fn split_counts() -> Verdict {
    let seed = 11;
    let gen = |p| generate(&DatasetSpec::for_protocol(p, seed)).map_err(|e| e.to_string());

    // Experiment 1, per operation.
    for op in [Op::Add, Op::Mul] {
        let mut spec = DatasetSpec::for_protocol(Protocol::DigitCount, seed);
        spec.operations = vec![op];
        let ds = generate(&spec).map_err(|e| e.to_string())?;
        let train: Vec<_> = ds.split(Split::Train).collect();
        ensure!(train.len() == 40, "exp1 {op:?} train {}", train.len());
        ensure!(train.iter().all(|e| text_digit_counts(&e.text) == [1, 1]), "exp1 train has multi-digit operands");
        let by_d = tally(ds.split(Split::Test).map(|e| *text_digit_counts(&e.text).iter().max().unwrap()));
        ensure!(by_d.get(&1) == Some(&41), "exp1 {op:?} single-digit test {:?}", by_d.get(&1));
        for d in 2..=9 {
            ensure!(by_d.get(&d) == Some(&50), "exp1 {op:?} {d}-digit test {:?}", by_d.get(&d));
        }
    }

    // Experiment 3.
    let ds = gen(Protocol::Formats)?;
    let train: Vec<_> = ds.split(Split::Train).collect();
    ensure!(train.len() == 400, "exp3 train {}", train.len());
    ensure!(
        train.iter().all(|e| matches!(e.meta.template, TemplateId::Single { format: 0, .. })),
        "exp3 train uses formats other than 0"
    );
    for split in [Split::Dev, Split::Test] {
        let per = tally(ds.split(split).map(|e| e.meta.template.number()));
        ensure!(per.len() == 5 && per.values().all(|&n| n == 200), "exp3 {split} per format {per:?}");
    }

    // Experiment 4, single-op part.
    let ds = gen(Protocol::Operations)?;
    for (split, want) in [(Split::Train, 635), (Split::Dev, 315), (Split::Test, 315)] {
        let per = tally(ds.split(split).map(|e| e.meta.ops.clone()));
        ensure!(per.len() == 4 && per.values().all(|&n| n == want), "exp4 {split} per op {per:?}");
    }

    // Experiment 4, two-op part.
    let ds = gen(Protocol::TwoOpFormulae)?;
    for split in Split::ALL {
        let per = tally(ds.split(split).map(|e| e.meta.template));
        ensure!(per.len() == 29 && per.values().all(|&n| n == 40), "exp4 two-op {split} per formula {per:?}");
    }

    // Experiment 5.
    let ds = gen(Protocol::OpCount)?;
    let train: Vec<_> = ds.split(Split::Train).collect();
    ensure!(train.len() == 700, "exp5 train {}", train.len());
    ensure!(train.iter().all(|e| e.meta.ops.len() == 1), "exp5 train has two-op problems");
    for split in [Split::Dev, Split::Test] {
        let examples: Vec<_> = ds.split(split).collect();
        let per = tally(examples.iter().map(|e| e.meta.template));
        ensure!(per.len() == 16 && per.values().all(|&n| n == 210), "exp5 {split} per combination {per:?}");
        for e in &examples {
            let label = mrkl_core::templates::template(e.meta.template, Spelling::Corrected).unwrap();
            ensure!(!label.formula_label()[1..].contains('('), "exp5 uses bracketed {}", label.formula_label());
            ensure!(text_digit_counts(&e.text).iter().all(|&d| d <= 7), "exp5 operand over 7 digits: {}", e.text);
        }
    }
    Ok("exp1 40/41/50x8, exp3 400/200x5, exp4 635/315/315 and 40x29, exp5 700/210x16 (<=7 digits)".into())
}

// 3 ------------------------------------------------------------------------

fn grid_round_trip() -> Verdict {
    let spec = DatasetSpec::for_protocol(Protocol::Grid, 3);
    let ds = generate(&spec).map_err(|e| e.to_string())?;
    let n = ds.examples.len();
    ensure!(n >= 20_000, "grid has only {n} examples");
    let templates = tally(ds.examples.iter().map(|e| e.meta.template)).len();
    let renderings = tally(ds.examples.iter().map(|e| e.meta.rendering == Rendering::Words)).len();
    let digits = tally(ds.examples.iter().map(|e| e.meta.max_digits())).len();
    ensure!((templates, renderings, digits) == (49, 2, 9), "grid covers {templates}x{renderings}x{digits}");

    let x = ReferenceExtractor::new();
    let outcomes: Vec<Outcome> = ds.examples.iter().map(|e| score_outcome(e, &x)).collect();
    let count = |o: Outcome| outcomes.iter().filter(|&&x| x == o).count();
    let accuracy = count(Outcome::Correct) as f64 / n as f64;
    let no_parse = count(Outcome::NoParse);
    ensure!((accuracy - 1.0).abs() <= EXACT && no_parse == 0, "accuracy {accuracy} over {n}, {no_parse} no-parse");
    Ok(format!("accuracy 1.0 on {n} examples (49 templates x 2 renderings x 9 digit counts), 0 no-parse"))
}

// 4 ------------------------------------------------------------------------

// Independent oracle: operands read back from the text, combined in u128.
fn oracle(text: &str, op: Op) -> Option<u128> {
    let nums: Vec<u128> =
        text.split(|c: char| !c.is_ascii_digit()).filter(|s| !s.is_empty()).map(|s| s.parse().unwrap()).collect();
    let [a, b] = nums[..] else { return None };
    match op {
        Op::Add => Some(a + b),
        Op::Mul => Some(a * b),
        _ => None,
    }
}

fn digit_generalization() -> Verdict {
    let x = ReferenceExtractor::new();
    let config = ExperimentConfig::experiment(1, false, 21).map_err(|e| e.to_string())?;
    let report = run(&config, &x).map_err(|e| e.to_string())?;
    for row in ["Addition", "Multiplication"] {
        for d in 1..=9 {
            let c = report.cell(row, &d.to_string()).ok_or_else(|| format!("no cell {row}/{d}"))?;
            ensure!((c.mean - 1.0).abs() <= EXACT, "{row} at {d} digits: {}", c.mean);
        }
    }

    let mut checked = 0;
    for op in [Op::Add, Op::Mul] {
        let mut spec = DatasetSpec::for_protocol(Protocol::DigitCount, 21);
        spec.operations = vec![op];
        let ds = generate(&spec).map_err(|e| e.to_string())?;
        for e in ds.split(Split::Test).filter(|e| text_digit_counts(&e.text) == [9, 9]) {
            let got = x.extract(&e.text).map_err(|err| format!("{}: {err}", e.text))?.expr.evaluate();
            let got = got.map_err(|err| err.to_string())?.to_string();
            let want = oracle(&e.text, op).ok_or("oracle could not read operands")?.to_string();
            ensure!(got == want, "{}: calculator {got}, oracle {want}", e.text);
            checked += 1;
        }
    }
    ensure!(checked == 100, "{checked} nine-digit examples checked");

    let mut shown = report.clone();
    mrkl::report::append_baseline(&mut shown, "gpt-3").map_err(|e| e.to_string())?;
    let md = render(&shown, Style::Markdown);
    let row = "| GPT-3 | N/A | 1.0 | 0.804 | 0.255 | 0.093 | N/A | N/A | N/A | N/A |";
    ensure!(md.contains(row), "baseline row missing from\n{md}");
    Ok(format!(
        "1.0 at 1-9 digits for add and mul; {checked} nine-digit results equal the u128 oracle; GPT-3 row shown"
    ))
}

// 5 ------------------------------------------------------------------------

fn rendering_and_layouts() -> Verdict {
    let config = ExperimentConfig::experiment(2, false, 5).map_err(|e| e.to_string())?;
    let full = run(&config, &ReferenceExtractor::new()).map_err(|e| e.to_string())?;
    let digits_only = run(&config, &ReferenceExtractor::digits_only()).map_err(|e| e.to_string())?;
    let cmp = compare(&full, &digits_only).map_err(|e| e.to_string())?;
    for cell in &cmp.cells {
        let (a, b) = (cell.a.ok_or("missing reference cell")?, cell.b.ok_or("missing digits-only cell")?);
        ensure!((a - 1.0).abs() <= EXACT, "reference {}/{} = {a}", cell.row, cell.col);
        let want = if cell.col == "Words" { 0.0 } else { 1.0 };
        ensure!((b - want).abs() <= EXACT, "digits-only {}/{} = {b}, want {want}", cell.row, cell.col);
    }
    ensure!(cmp.cells.len() == 4, "comparison has {} cells", cmp.cells.len());

    let want: [(LayoutId, usize, usize); 6] = [
        (LayoutId::Digits, 0, 9),
        (LayoutId::Renderings, 2, 2),
        (LayoutId::Formats, 5, 4),
        (LayoutId::Operations, 4, 4),
        (LayoutId::TwoOpFormulae, 29, 1),
        (LayoutId::OpPairs, 4, 4),
    ];
    let x = ReferenceExtractor::new();
    let mut shapes = Vec::new();
    for (layout, rows, cols) in want {
        let id = match layout {
            LayoutId::Digits => 1,
            LayoutId::Renderings => 2,
            LayoutId::Formats => 3,
            LayoutId::Operations | LayoutId::TwoOpFormulae => 4,
            LayoutId::OpPairs => 5,
        };
        let mut config =
            ExperimentConfig::experiment(id, layout == LayoutId::TwoOpFormulae, 5).map_err(|e| e.to_string())?;
        config.runs = 1;
        let report: EvalReport = run(&config, &x).map_err(|e| e.to_string())?;
        ensure!(report.layout == layout, "experiment {id} gave layout {}", report.layout);
        ensure!(report.cols.len() == cols, "{layout}: {} columns", report.cols.len());
        // Digit-count rows are the trained operations; every other layout fixes its rows.
        if rows > 0 {
            ensure!(report.layout.rows().len() == rows, "{layout}: {} canonical rows", report.layout.rows().len());
            ensure!(report.rows.len() == rows, "{layout}: {} rows", report.rows.len());
            ensure!(report.cells.len() == rows * cols, "{layout}: {} cells", report.cells.len());
        } else {
            ensure!(report.cells.len() == report.rows.len() * cols, "{layout}: ragged table");
        }
        shapes.push(format!("{}x{}", report.rows.len(), cols));
    }
    Ok(format!("digits-only: Words 0.0, Digits 1.0; layouts {}", shapes.join(", ")))
}

// 6 ------------------------------------------------------------------------

fn overlap_audit() -> Verdict {
    let mut audited = 0;
    for seed in [0, 1, 2] {
        for p in [
            Protocol::DigitCount,
            Protocol::Rendering,
            Protocol::Formats,
            Protocol::Operations,
            Protocol::TwoOpFormulae,
            Protocol::OpCount,
        ] {
            let mut spec = DatasetSpec::for_protocol(p, seed);
            if p == Protocol::DigitCount {
                spec.operations = vec![Op::Add, Op::Mul];
            }
            let ds = generate(&spec).map_err(|e| e.to_string())?;
            ensure!(check_no_overlap(&ds), "{} seed {seed} leaks test expressions into train", p.name());
            audited += ds.examples.len();
        }
    }

    // The audit must see through wording: re-phrase a training expression in
    // another format and plant it in the test split.
    let mut ds = generate(&DatasetSpec::for_protocol(Protocol::Formats, 0)).map_err(|e| e.to_string())?;
    let train = ds.split(Split::Train).next().unwrap().clone();
    let TemplateId::Single { op, .. } = train.meta.template else { return Err("two-op train example".into()) };
    let other = mrkl_core::templates::template(TemplateId::Single { format: 3, op }, Spelling::Corrected).unwrap();
    let operands: Vec<u64> = text_digit_counts(&train.text)
        .iter()
        .zip(train.text.split(|c: char| !c.is_ascii_digit()).filter(|s| !s.is_empty()))
        .map(|(_, s)| s.parse().unwrap())
        .collect();
    let mut planted =
        mrkl_core::templates::instantiate(&other, &operands, Rendering::Digits).map_err(|e| e.to_string())?;
    ensure!(planted.text != train.text, "re-phrasing produced the same text");
    planted.meta.split = Split::Test;
    ds.examples.push(planted);
    ensure!(!check_no_overlap(&ds), "re-worded duplicate was not flagged");
    Ok(format!("{audited} examples over 6 protocols x 3 seeds clean; re-worded duplicate flagged"))
}

// 7 ------------------------------------------------------------------------

struct Fixed {
    name: &'static str,
    confidence: f64,
}

impl Expert for Fixed {
    fn descriptor(&self) -> ExpertDescriptor {
        ExpertDescriptor::new(self.name, ExpertKind::Symbolic, "test expert")
    }

    fn handle(&self, _text: &str) -> Result<Handled, ExpertError> {
        Ok(Handled::Answer(ExpertResponse {
            answer_text: self.name.into(),
            payload: Payload::Completion { text: self.name.into() },
            confidence: self.confidence,
            rationale: String::new(),
        }))
    }
}

struct Never;

impl Expert for Never {
    fn descriptor(&self) -> ExpertDescriptor {
        ExpertDescriptor::new("never", ExpertKind::Symbolic, "declines everything")
    }

    fn handle(&self, _text: &str) -> Result<Handled, ExpertError> {
        Ok(Handled::Decline("never".into()))
    }
}

fn fuzz_input(rng: &mut ChaCha8Rng) -> String {
    const WORDS: &[&str] = &[
        "how",
        "much",
        "is",
        "what",
        "the",
        "sum",
        "of",
        "and",
        "plus",
        "minus",
        "times",
        "over",
        "divided",
        "by",
        "product",
        "ratio",
        "between",
        "difference",
        "seven",
        "twenty",
        "million",
        "42",
        "3.5",
        "-1",
        "?",
        "date",
        "today",
        "convert",
        "USD",
        "to",
        "EUR",
        "look",
        "up",
        "acme",
        "(",
        ")",
        "",
        "\u{e9}",
        "\u{1f600}",
    ];
    match rng.gen_range(0..4) {
        3 => format!("How much is {} plus {}?", rng.gen_range(0..10_000), rng.gen_range(0..10_000)),
        0 => (0..rng.gen_range(0..12)).map(|_| WORDS[rng.gen_range(0..WORDS.len())]).collect::<Vec<_>>().join(" "),
        1 => (0..rng.gen_range(0..40)).map(|_| char::from(rng.gen_range(32u8..127))).collect(),
        _ => (0..rng.gen_range(0..20)).filter_map(|_| char::from_u32(rng.gen_range(0..0x3000))).collect(),
    }
}

fn router_invariants() -> Verdict {
    let mut router = Router::new(FallbackExpert::stub());
    router.register(Calculator::new(ReferenceExtractor::new())).map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let inputs: Vec<String> = (0..1000).map(|_| fuzz_input(&mut rng)).collect();
    let mut by_expert = BTreeMap::new();
    for text in &inputs {
        let d = router.route(text);
        ensure!(d.scores.len() == 2 && d.scores.get("fallback") == Some(0.0), "scores for {text:?}: {:?}", d.scores);
        ensure!(d.used_fallback == (d.chosen == "fallback"), "inconsistent decision for {text:?}");
        *by_expert.entry(d.chosen.clone()).or_insert(0) += 1;
    }

    let d = router.route("Tell me a story about the sea");
    ensure!(d.used_fallback && d.chosen == "fallback", "non-matching input went to {}", d.chosen);

    // Registering an expert that never answers changes no decision.
    let before: Vec<_> = inputs.iter().map(|t| router.route(t)).collect();
    router.register(Never).map_err(|e| e.to_string())?;
    for (t, b) in inputs.iter().zip(&before) {
        let a = router.route(t);
        ensure!((&a.chosen, &a.response) == (&b.chosen, &b.response), "decision for {t:?} changed");
    }

    // Equal confidence: the first registered expert wins, every time.
    let mut tied = Router::new(FallbackExpert::stub());
    tied.register(Fixed { name: "first", confidence: 0.8 }).map_err(|e| e.to_string())?;
    tied.register(Fixed { name: "second", confidence: 0.8 }).map_err(|e| e.to_string())?;
    for _ in 0..100 {
        ensure!(tied.route("anything").chosen == "first", "tie not broken by registration order");
    }
    Ok(format!("1000 fuzzed inputs routed ({by_expert:?}); fallback, non-interference and ties hold"))
}

// 8 ------------------------------------------------------------------------

fn two_op_splits() -> Verdict {
    let labels: BTreeMap<TemplateId, &str> =
        catalog_with(2, Spelling::Corrected).into_iter().map(|t| (t.id, t.formula_label())).collect();
    // Bracket requirement read off the label: a parenthesis inside the outer pair.
    let bracketed = |id: &TemplateId| labels[id][1..].contains('(');
    let config = ExperimentConfig::experiment(4, true, 0).map_err(|e| e.to_string())?;
    ensure!(config.runs == 10, "two-op protocol uses {} splits", config.runs);
    for run in 0..config.runs as u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(run);
        let s = two_op_split(&mut rng);
        ensure!(s.train.len() == 14 && s.test.len() == 15, "split {run}: {}/{}", s.train.len(), s.test.len());
        let n = s.train.iter().filter(|id| bracketed(id)).count();
        ensure!(n == 1, "split {run}: {n} bracketed formulae in train");
        let mut all: Vec<_> = s.train.iter().chain(&s.test).collect();
        all.sort();
        all.dedup();
        ensure!(all.len() == 29, "split {run} does not partition the formulae");
    }
    Ok("10 seeded splits: 14 train / 15 test, one bracketed formula in train".into())
}

// 9 ------------------------------------------------------------------------

fn mrkl(args: &[&str]) -> Result<String, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_mrkl"))
        .args(args)
        .env_remove("MRKL_CONFIG")
        .env_remove("MRKL_CLOCK")
        .output()
        .map_err(|e| e.to_string())?;
    let stdout = String::from_utf8_lossy(&out.stdout).into_owned();
    ensure!(
        out.status.code() == Some(0),
        "mrkl {args:?} exited {:?}: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    Ok(stdout)
}

fn smoke() -> Verdict {
    let out = mrkl(&["route", "How much is three minus 1"])?;
    let lines: Vec<&str> = out.lines().collect();
    ensure!(lines.first() == Some(&"2"), "answer line: {out:?}");
    ensure!(lines.contains(&"expert: calculator"), "expert line: {out:?}");
    ensure!(lines.iter().any(|l| l.starts_with("rationale: calculator evaluated (3-1) = 2")), "rationale: {out:?}");

    let out = mrkl(&["route", "--clock", "2022-05-01", "What is today's date?"])?;
    let lines: Vec<&str> = out.lines().collect();
    ensure!(lines.first() == Some(&"2022-05-01") && lines.contains(&"expert: date"), "date route: {out:?}");
    Ok("calculator answers 2, date expert answers 2022-05-01, both exit 0".into())
}
