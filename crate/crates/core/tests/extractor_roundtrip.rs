use mrkl_core::extractor::{ExtractError, Extractor, NoParseReason, ReferenceExtractor};
use mrkl_core::numword::Rendering;
use mrkl_core::templates::{full_catalog, generate, instantiate, DatasetSpec, Protocol, Spelling};
use rand::SeedableRng;

#[test]
fn every_grid_example_round_trips() {
    let mut spec = DatasetSpec::for_protocol(Protocol::Grid, 5);
    spec.counts.test = 3;
    let ds = generate(&spec).unwrap();
    assert_eq!(ds.examples.len(), 49 * 2 * 9 * 3);
    let x = ReferenceExtractor::new();
    for e in &ds.examples {
        let got = x.extract(&e.text).unwrap_or_else(|err| panic!("{}: {err}", e.text));
        assert_eq!(got.expr, e.gold_expr, "{}", e.text);
        assert_eq!(got.matched_template, Some(e.meta.template), "{}", e.text);
    }
}

#[test]
fn verbatim_catalog_round_trips() {
    let mut spec = DatasetSpec::for_protocol(Protocol::Grid, 9);
    spec.counts.test = 1;
    spec.spelling = Spelling::Verbatim;
    let x = ReferenceExtractor::new();
    for e in generate(&spec).unwrap().examples {
        assert_eq!(x.extract(&e.text).unwrap().expr, e.gold_expr, "{}", e.text);
    }
}

#[test]
fn rendering_invariance() {
    let x = ReferenceExtractor::new();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
    for t in full_catalog(Spelling::Corrected) {
        for d in 1..=9 {
            let ops = mrkl_core::templates::sample_operands(d, &t, &mut rng);
            let digits = instantiate(&t, &ops, Rendering::Digits).unwrap();
            let words = instantiate(&t, &ops, Rendering::Words).unwrap();
            assert_eq!(x.extract(&digits.text).unwrap().expr, x.extract(&words.text).unwrap().expr);
        }
    }
}

#[test]
fn no_false_accepts() {
    let fixture = include_str!("fixtures/non_arithmetic.txt");
    let lines: Vec<&str> = fixture.lines().filter(|l| !l.trim().is_empty()).collect();
    assert_eq!(lines.len(), 100);
    let x = ReferenceExtractor::new();
    for line in lines {
        match x.extract(line) {
            Err(ExtractError::NoParse(
                NoParseReason::UnknownVocabulary(_) | NoParseReason::NoTemplateMatch | NoParseReason::Ambiguous(_),
            )) => {}
            other => panic!("{line:?} gave {other:?}"),
        }
    }
}
