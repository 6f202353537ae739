mod common;

use detml_core::facts::{extract, parse_source, resolve_aliases, FactKind};
use proptest::prelude::*;
use serde::Deserialize;

#[derive(Deserialize)]
struct Corpus {
    case: Vec<Case>,
}

#[derive(Deserialize)]
struct Case {
    name: String,
    source: String,
    imports: usize,
    facts: Vec<String>,
}

fn corpus() -> Vec<Case> {
    let c: Corpus = toml::from_str(&common::fixture("alias_corpus.toml")).unwrap();
    c.case
}

fn describe(kind: FactKind, path: &str, resolved: bool) -> String {
    format!("{kind} {path}{}", if resolved { "" } else { "?" })
}

#[test]
fn corpus_has_twenty_cases() {
    assert_eq!(corpus().len(), 20);
}

#[test]
fn corpus_names_resolve_as_written() {
    for case in corpus() {
        let fs = extract(case.source.as_bytes(), "case.py").unwrap();
        let actual: Vec<String> =
            fs.facts.iter().map(|f| describe(f.kind, &f.canonical_path, f.resolved)).collect();
        // expected entries appear in order, as a subsequence of the facts
        let mut it = actual.iter();
        for want in &case.facts {
            assert!(it.any(|a| a == want), "{}: `{want}` missing or out of order in {actual:#?}", case.name);
        }
    }
}

#[test]
fn one_import_fact_per_import_statement() {
    for case in corpus() {
        let fs = extract(case.source.as_bytes(), "case.py").unwrap();
        assert_eq!(fs.facts_of(FactKind::Import).count(), case.imports, "{}", case.name);
    }
}

#[test]
fn listing_import_counts() {
    for (rel, n) in [("listings/pytorch.py", 4), ("listings/tensorflow.py", 4), ("listings/xgboost.py", 3)] {
        let fs = extract(common::fixture(rel).as_bytes(), rel).unwrap();
        assert_eq!(fs.facts_of(FactKind::Import).count(), n, "{rel}");
    }
}

#[test]
fn serialized_facts_are_stable() {
    for rel in common::ALL_PY {
        let text = common::fixture(rel);
        let first = extract(text.as_bytes(), rel).unwrap().to_json();
        for _ in 0..5 {
            assert_eq!(extract(text.as_bytes(), rel).unwrap().to_json(), first, "{rel}");
        }
    }
}

#[test]
fn resolution_is_idempotent_on_fixtures() {
    for rel in common::ALL_PY {
        let once = extract(common::fixture(rel).as_bytes(), rel).unwrap();
        assert_eq!(resolve_aliases(once.clone()), once, "{rel}");
    }
}

#[test]
fn facts_follow_source_order() {
    for rel in common::ALL_PY {
        let fs = parse_source(common::fixture(rel).as_bytes(), rel).unwrap();
        let keys: Vec<_> = fs.facts.iter().map(|f| (f.location.line, f.location.column)).collect();
        let mut sorted = keys.clone();
        sorted.sort();
        assert_eq!(keys, sorted, "{rel}");
    }
}

fn statement() -> impl Strategy<Value = String> {
    prop_oneof![
        Just("import torch as T".to_string()),
        Just("import numpy as np".to_string()),
        Just("from os import environ".to_string()),
        Just("environ['PYTHONHASHSEED'] = '0'".to_string()),
        Just("T.manual_seed(s)".to_string()),
        Just("np.random.seed(s)".to_string()),
        Just("T.backends.cudnn.benchmark = False".to_string()),
        Just("cfg = {'seed': 1, 'eta': 0.3}".to_string()),
        Just("model = build(depth=3, seed=s)".to_string()),
        Just("if ok:\n    T.use_deterministic_algorithms(True)".to_string()),
        Just("def f():\n    import tensorflow as tf\n    tf.random.set_seed(1)".to_string()),
        "[a-z]{1,6}".prop_map(|n| format!("{n} = {n}.value + 1")),
    ]
}

proptest! {
    #[test]
    fn extraction_is_pure_and_ordered(stmts in prop::collection::vec(statement(), 0..12)) {
        let src = stmts.join("\n") + "\n";
        let a = extract(src.as_bytes(), "p.py").unwrap();
        let b = extract(src.as_bytes(), "p.py").unwrap();
        prop_assert_eq!(a.to_json(), b.to_json());
        let keys: Vec<_> = a.facts.iter().map(|f| (f.location.line, f.location.column)).collect();
        let mut sorted = keys.clone();
        sorted.sort();
        prop_assert_eq!(keys, sorted);
        let import_lines = stmts.iter().map(|s| s.matches("import ").count()).sum::<usize>();
        prop_assert_eq!(a.facts_of(FactKind::Import).count(), import_lines);
    }
}
