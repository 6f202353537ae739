//! Rule evaluation over single files ([`lint_facts`]) and whole project
//! trees ([`lint_project`]).

mod project;
mod report;

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::facts::{Fact, FactSet, Location};
use crate::rules::{Rule, RuleCatalog, Severity};

pub use project::{lint_project, project_facts, LintError, LintOptions, PROJECT_CHECK_ANCHORS, PROJECT_CHECK_IDS};
pub use report::{Counts, FileReport, LintReport, OutputFormat};

/// Exit code for a run with no error-severity violations.
pub const EXIT_CLEAN: i32 = 0;
/// Exit code when errors were found (or sync conflicts were left).
pub const EXIT_FINDINGS: i32 = 1;
/// Exit code for usage errors and tool failures.
pub const EXIT_TOOL_FAILURE: i32 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scope {
    File,
    Project,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Violation {
    pub rule_id: String,
    pub severity: Severity,
    pub scope: Scope,
    pub location: Option<Location>,
    pub message: String,
    pub fix_hint: String,
    pub paper_anchor: String,
}

impl Violation {
    fn from_rule(rule: &Rule, scope: Scope, location: Option<Location>) -> Self {
        Violation {
            rule_id: rule.id.clone(),
            severity: rule.severity,
            scope,
            location,
            message: rule.message.clone(),
            fix_hint: rule.fix_hint.clone(),
            paper_anchor: rule.paper_anchor.clone(),
        }
    }

    pub fn line(&self) -> u32 {
        self.location.as_ref().map_or(0, |l| l.line)
    }

    fn sort_key(&self) -> (&str, u32, u32) {
        let col = self.location.as_ref().map_or(0, |l| l.column);
        (&self.rule_id, self.line(), col)
    }
}

/// Canonical violation order: rule id, then line, then column.
pub fn sort_violations(violations: &mut [Violation]) {
    violations.sort_by(|a, b| a.sort_key().cmp(&b.sort_key()).then_with(|| a.cmp(b)));
}

/// Violations of every required rule that no fact satisfies.
pub(crate) fn missing_requirements<'a>(
    catalog: &RuleCatalog,
    imported: &BTreeSet<String>,
    facts: impl Iterator<Item = &'a Fact> + Clone,
    scope: Scope,
) -> Vec<Violation> {
    catalog
        .iter()
        .filter(|r| r.kind.is_required() && r.is_active(imported))
        .filter(|r| !facts.clone().any(|f| r.matches(f)))
        .map(|r| Violation::from_rule(r, scope, None))
        .collect()
}

/// One violation per fact hitting a forbidden or advisory rule.
pub(crate) fn pattern_hits(catalog: &RuleCatalog, facts: &FactSet) -> Vec<Violation> {
    let mut out = Vec::new();
    for rule in catalog.iter().filter(|r| !r.kind.is_required() && r.is_active(&facts.imported_libraries)) {
        for fact in facts.facts.iter().filter(|f| rule.matches(f)) {
            out.push(Violation::from_rule(rule, Scope::File, Some(fact.location.clone())));
        }
    }
    out
}

/// Evaluate `catalog` against one alias-resolved file.
///
/// Required rules yield at most one location-less violation each; forbidden
/// and advisory rules yield one violation per matching fact. Rules whose
/// activation modules are not imported by the file stay silent.
pub fn lint_facts(facts: &FactSet, catalog: &RuleCatalog) -> Vec<Violation> {
    let mut out = missing_requirements(
        catalog,
        &facts.imported_libraries,
        facts.facts.iter(),
        Scope::File,
    );
    out.extend(pattern_hits(catalog, facts));
    sort_violations(&mut out);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::facts::extract;
    use crate::rules::builtin_rules;

    fn lint(src: &str) -> Vec<Violation> {
        lint_facts(&extract(src.as_bytes(), "t.py").unwrap(), &builtin_rules())
    }

    fn ids(v: &[Violation]) -> Vec<&str> {
        v.iter().map(|v| v.rule_id.as_str()).collect()
    }

    #[test]
    fn empty_file_is_silent() {
        assert!(lint("").is_empty());
    }

    #[test]
    fn numpy_only_script_needs_only_numpy_seed() {
        let v = lint("import numpy as np\nx = np.zeros(3)\n");
        assert_eq!(ids(&v), ["general-numpy-seed"]);
        assert!(v[0].location.is_none());
        assert_eq!(v[0].scope, Scope::File);
    }

    #[test]
    fn forbidden_hits_carry_locations() {
        let v = lint("import torch\nimport torch.nn as nn\nm = nn.Sequential(nn.MaxPool3d(2), nn.MaxPool3d(2))\n");
        let hits: Vec<_> = v.iter().filter(|v| v.rule_id == "pytorch-forbidden-maxpool3d").collect();
        assert_eq!(hits.len(), 2);
        assert!(hits.iter().all(|h| h.location.as_ref().unwrap().line == 3));
        assert!(hits[0].location.as_ref().unwrap().column < hits[1].location.as_ref().unwrap().column);
    }

    #[test]
    fn wrong_value_does_not_satisfy() {
        let src = "import torch\ntorch.backends.cudnn.benchmark = True\n";
        assert!(ids(&lint(src)).contains(&"pytorch-cudnn-benchmark"));
    }

    #[test]
    fn xgboost_sklearn_random_state_satisfies_seed() {
        let src = "import xgboost as xgb\nimport os\nos.environ['PYTHONHASHSEED'] = '0'\nclf = xgb.XGBClassifier(random_state=0)\n";
        assert!(lint(src).is_empty());
    }

    #[test]
    fn advisory_on_single_precision() {
        let src = "import os\nimport xgboost as xgb\nos.environ['PYTHONHASHSEED'] = '0'\nxgb.train({'seed': 0, 'single_precision_histogram': True}, d)\n";
        let v = lint(src);
        assert_eq!(ids(&v), ["xgboost-single-precision"]);
        assert_eq!(v[0].severity, Severity::Warning);
        assert_eq!(v[0].location.as_ref().unwrap().line, 4);
    }

    #[test]
    fn violations_are_sorted() {
        let v = lint("import torch\n");
        let mut sorted = v.clone();
        sort_violations(&mut sorted);
        assert_eq!(v, sorted);
        assert!(ids(&v).windows(2).all(|w| w[0] <= w[1]));
    }
}
