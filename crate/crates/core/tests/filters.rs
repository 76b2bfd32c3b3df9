use std::collections::BTreeSet;

use patcorp::corpus::FieldDoc;
use patcorp::filters::{filter_docs, FilterConfig, FilterStage, Filters, LanguageIdentifier, NgramLangId};
use patcorp::par::Execution;
use patcorp::phase1::{clean_record, CleaningReport, Phase1Config};
use patcorp::synth::{self, SynthConfig};

fn heldout(src: &str) -> Vec<&str> {
    src.lines().map(str::trim).filter(|l| !l.is_empty()).collect()
}

#[test]
fn heldout_english_accepted() {
    let filters = Filters::new(FilterConfig::default()).unwrap();
    let lines = heldout(include_str!("data/heldout_en.txt"));
    let accepted = lines.iter().filter(|l| filters.stage(FilterStage::Language, l).passed).count();
    assert!(accepted as f64 >= 0.99 * lines.len() as f64, "{accepted}/{} accepted", lines.len());

    let s = NgramLangId::builtin()
        .detect("A semiconductor device comprising a substrate and a gate electrode.")
        .unwrap();
    assert_eq!(s.language, "en");
    assert!(s.confidence >= 0.9, "{}", s.confidence);
}

#[test]
fn heldout_german_rejected() {
    let filters = Filters::new(FilterConfig::default()).unwrap();
    let lines = heldout(include_str!("data/heldout_de.txt"));
    let rejected = lines.iter().filter(|l| !filters.stage(FilterStage::Language, l).passed).count();
    assert!(rejected as f64 >= 0.95 * lines.len() as f64, "{rejected}/{} rejected", lines.len());
    assert!(!filters.stage(FilterStage::Language, "Vorrichtung zur Messung der Temperatur eines Substrats.").passed);
}

fn field_docs(n: usize, seed: u64) -> Vec<FieldDoc> {
    let cfg = Phase1Config::default();
    let mut rep = CleaningReport::default();
    synth::records(&SynthConfig {
        docs: n,
        seed,
        junk_frac: 0.10,
        german_frac: 0.10,
        ..Default::default()
    })
    .iter()
    .flat_map(|r| clean_record(r, &cfg, &mut rep).record.fields())
    .collect()
}

fn survivors(docs: &[FieldDoc], filters: &Filters, exec: Execution) -> BTreeSet<String> {
    docs.iter()
        .zip(filter_docs(docs, filters, exec))
        .filter(|(_, o)| o.passed)
        .map(|(d, _)| d.doc_id.clone())
        .collect()
}

#[test]
fn cascade_equals_intersection_of_independent_filters() {
    let docs = field_docs(1000, 11);
    let filters = Filters::new(FilterConfig::default()).unwrap();
    let cascade = survivors(&docs, &filters, Execution::Parallel);

    let mut oracle: BTreeSet<String> = docs.iter().filter(|d| !d.text.trim().is_empty()).map(|d| d.doc_id.clone()).collect();
    for stage in FilterStage::DEFAULT_ORDER {
        let only = FilterConfig {
            order: vec![stage],
            ..FilterConfig::default()
        };
        let alone = survivors(&docs, &Filters::new(only).unwrap(), Execution::Sequential);
        oracle = oracle.intersection(&alone).cloned().collect();
    }
    assert_eq!(cascade, oracle);
    assert!(!cascade.is_empty() && cascade.len() < docs.len());

    let mut reversed = FilterConfig::default();
    reversed.order.reverse();
    assert_eq!(survivors(&docs, &Filters::new(reversed).unwrap(), Execution::Sequential), cascade);
}

#[test]
fn dropped_trail_ends_at_first_failure() {
    let docs = field_docs(300, 12);
    let filters = Filters::new(FilterConfig::default()).unwrap();
    for (d, o) in docs.iter().zip(filter_docs(&docs, &filters, Execution::Parallel)) {
        let (last, head) = o.trail.split_last().unwrap();
        assert!(head.iter().all(|v| v.passed), "{}", d.doc_id);
        assert_eq!(last.passed, o.passed);
        if !o.passed {
            assert_eq!(o.failing_rule(), Some(last.rule.as_str()));
        }
    }
}
