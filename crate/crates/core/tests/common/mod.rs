// Shared by the core integration tests and the CLI acceptance suite.
#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::PathBuf;

use detml_core::facts::extract;
use detml_core::lint::{lint_facts, Violation};
use detml_core::rules::{builtin_rules, RuleCatalog};
use regex::Regex;

pub fn fixtures_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures")
}

pub fn fixture(rel: &str) -> String {
    let path = fixtures_dir().join(rel);
    std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

pub const LISTINGS: &[&str] = &["listings/pytorch.py", "listings/tensorflow.py", "listings/xgboost.py"];

pub const FORBIDDEN: &[(&str, &str, u32)] = &[
    ("forbidden/maxpool3d.py", "pytorch-forbidden-maxpool3d", 12),
    ("forbidden/convtranspose3d.py", "pytorch-forbidden-convtranspose3d", 13),
    ("forbidden/allreduce.py", "xgboost-forbidden-allreduce", 11),
];

/// Every `.py` fixture, relative to [`fixtures_dir`].
pub const ALL_PY: &[&str] = &[
    "listings/pytorch.py",
    "listings/tensorflow.py",
    "listings/xgboost.py",
    "listings/xgboost_imported.py",
    "forbidden/maxpool3d.py",
    "forbidden/convtranspose3d.py",
    "forbidden/allreduce.py",
];

/// Deletion oracle, written from the rule definitions before the engine ran:
/// (fixture, baseline rule ids, [(deleted lines, ids added, ids removed)]).
/// Lines not listed change nothing.
pub type Mutant = (&'static [usize], &'static [&'static str], &'static [&'static str]);

pub const MUTATION_TABLE: &[(&str, &[&str], &[Mutant])] = &[
    (
        "listings/pytorch.py",
        &["pytorch-set-deterministic"],
        &[
            (&[2], &[], &["pytorch-set-deterministic"]),
            (&[6], &["general-pythonhashseed"], &[]),
            (&[7], &["general-random-seed"], &[]),
            (&[8], &["general-numpy-seed"], &[]),
            (&[9], &["pytorch-manual-seed"], &[]),
            (&[10], &["pytorch-cudnn-deterministic"], &[]),
            (&[11], &["pytorch-cudnn-benchmark"], &[]),
        ],
    ),
    (
        "listings/tensorflow.py",
        &[],
        &[
            (&[6], &["general-pythonhashseed"], &[]),
            (&[7], &["general-random-seed"], &[]),
            (&[8], &["general-numpy-seed"], &[]),
            (&[9], &["tensorflow-random-seed"], &[]),
            (&[10], &["tensorflow-deterministic-ops"], &[]),
            (&[11], &["tensorflow-intra-op-threads"], &[]),
            (&[12], &["tensorflow-inter-op-threads"], &[]),
        ],
    ),
    (
        "listings/xgboost.py",
        &[],
        &[(&[6], &["general-random-seed"], &[]), (&[7], &["general-numpy-seed"], &[])],
    ),
    (
        "listings/xgboost_imported.py",
        &["xgboost-single-precision"],
        &[
            (&[5], &["general-pythonhashseed"], &[]),
            (&[6], &["general-random-seed"], &[]),
            (&[7], &["general-numpy-seed"], &[]),
            (&[8, 9], &["xgboost-param-seed"], &["xgboost-single-precision"]),
            (&[10], &[], &["xgboost-single-precision"]),
        ],
    ),
];

pub struct MutantCase {
    pub fixture: &'static str,
    pub deleted: Vec<usize>,
    pub source: String,
    pub expected: Vec<String>,
    /// True when the deleted line carries a recipe requirement.
    pub mandatory: bool,
}

/// One case per single-line deletion of every fixture line, plus the
/// multi-line entries of the table. Lines of a multi-line entry form one
/// statement and are only deleted together.
pub fn mutant_cases() -> Vec<MutantCase> {
    let mut out = Vec::new();
    for (fixture_name, baseline, mutants) in MUTATION_TABLE {
        let text = fixture(fixture_name);
        let lines: Vec<&str> = text.lines().collect();
        let grouped: Vec<usize> =
            mutants.iter().filter(|(d, _, _)| d.len() > 1).flat_map(|(d, _, _)| d.iter().copied()).collect();
        let mut deletions: Vec<Vec<usize>> =
            (1..=lines.len()).filter(|l| !grouped.contains(l)).map(|l| vec![l]).collect();
        for (del, _, _) in *mutants {
            if del.len() > 1 {
                deletions.push(del.to_vec());
            }
        }
        for deleted in deletions {
            let entry = mutants.iter().find(|(d, _, _)| *d == deleted.as_slice());
            let mut expected: Vec<String> = baseline.iter().map(|s| s.to_string()).collect();
            let mut mandatory = false;
            if let Some((_, add, remove)) = entry {
                for r in *remove {
                    let i = expected.iter().position(|e| e == r).expect("removed id is in the baseline");
                    expected.remove(i);
                }
                expected.extend(add.iter().map(|s| s.to_string()));
                mandatory = !add.is_empty();
            }
            expected.sort();
            let source: String = lines
                .iter()
                .enumerate()
                .filter(|(i, _)| !deleted.contains(&(i + 1)))
                .map(|(_, l)| format!("{l}\n"))
                .collect();
            out.push(MutantCase { fixture: fixture_name, deleted, source, expected, mandatory });
        }
    }
    out
}

pub fn lint_source(src: &str, catalog: &RuleCatalog) -> Vec<Violation> {
    lint_facts(&extract(src.as_bytes(), "t.py").expect("fixtures are UTF-8"), catalog)
}

pub fn lint_ids(src: &str) -> Vec<String> {
    let mut ids: Vec<String> = lint_source(src, &builtin_rules()).into_iter().map(|v| v.rule_id).collect();
    ids.sort();
    ids
}

/// Order-free summary used for multiset comparisons.
pub fn multiset(violations: &[Violation]) -> BTreeMap<(String, String, u32, u32), usize> {
    let mut m = BTreeMap::new();
    for v in violations {
        let (line, col) = v.location.as_ref().map_or((0, 0), |l| (l.line, l.column));
        *m.entry((v.rule_id.clone(), v.severity.to_string(), line, col)).or_insert(0) += 1;
    }
    m
}

/// Rebind every imported name in `src` to a new alias chosen by `alias_for`
/// (given the imported module or member and the name it was bound to) and
/// rewrite the uses. Handles the import forms present in the fixtures:
/// `import m`, `import m as a` and `from p import n [as a]`.
pub fn rewrite_aliases(src: &str, alias_for: &dyn Fn(&str, &str) -> String) -> String {
    let plain = Regex::new(r"^import ([A-Za-z_][A-Za-z0-9_]*)(?: as ([A-Za-z_][A-Za-z0-9_]*))?\s*$").unwrap();
    let from = Regex::new(r"^from ([A-Za-z_][A-Za-z0-9_.]*) import ([A-Za-z_][A-Za-z0-9_]*)(?: as ([A-Za-z_][A-Za-z0-9_]*))?\s*$")
        .unwrap();
    let mut renames: Vec<(String, String)> = Vec::new();
    let mut header: Vec<String> = Vec::new();
    for line in src.lines() {
        if let Some(c) = plain.captures(line) {
            let module = &c[1];
            let old = c.get(2).map_or(module, |m| m.as_str());
            let new = alias_for(module, old);
            renames.push((old.to_string(), new.clone()));
            header.push(format!("import {module} as {new}"));
        } else if let Some(c) = from.captures(line) {
            let member = format!("{}.{}", &c[1], &c[2]);
            let old = c.get(3).map_or(&c[2], |m| m.as_str());
            let new = alias_for(&member, old);
            renames.push((old.to_string(), new.clone()));
            header.push(format!("from {} import {} as {new}", &c[1], &c[2]));
        } else {
            header.push(String::new());
        }
    }
    let mut out = String::new();
    for (line, replaced) in src.lines().zip(&header) {
        if !replaced.is_empty() {
            out.push_str(replaced);
        } else {
            let mut l = line.to_string();
            for (old, new) in &renames {
                let re = Regex::new(&format!(r"(^|[^A-Za-z0-9_.'\x22]){}\b", regex::escape(old))).unwrap();
                l = re.replace_all(&l, format!("${{1}}{new}")).into_owned();
            }
            out.push_str(&l);
        }
        out.push('\n');
    }
    out
}

/// The fixed rewrite: `import torch as T`, `numpy as n_p`, ...
pub fn standard_alias(module: &str, bound: &str) -> String {
    match module {
        "torch" => "T".into(),
        "numpy" => "n_p".into(),
        "tensorflow" => "tf2".into(),
        "os" => "operating_system".into(),
        "random" => "rnd".into(),
        "xgboost" => "xg".into(),
        _ => format!("{bound}_alias"),
    }
}
