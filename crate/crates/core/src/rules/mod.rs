//! Determinism rules: requirements (seeds, flags, environment variables) and
//! prohibitions (operations without deterministic kernels).
//!
//! Rules are plain data. [`builtin_rules`] ships the recipe for PyTorch,
//! TensorFlow and XGBoost; [`load_rules`] overlays a user rule file on top so
//! catalogs can track framework releases without a new tool version.

mod builtin;
mod file;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::facts::{Fact, FactKind, Literal};

pub use builtin::{builtin_rules, BUILTIN_CATALOG_VERSION, BUILTIN_RULE_IDS};
pub use file::{load_rules, RuleFileError, CATALOG_FORMAT};

/// Verbatim source fragments that rule anchors quote.
///
/// Every built-in anchor, and every project-check anchor, occurs in it:
///
/// ```
/// use detml_core::lint::PROJECT_CHECK_ANCHORS;
/// use detml_core::rules::{builtin_rules, ANCHOR_EXCERPTS};
///
/// for rule in builtin_rules().iter() {
///     assert!(!rule.paper_anchor.is_empty(), "{}", rule.id);
///     assert!(ANCHOR_EXCERPTS.contains(&rule.paper_anchor), "{}: {:?}", rule.id, rule.paper_anchor);
/// }
/// for (id, anchor) in PROJECT_CHECK_ANCHORS {
///     assert!(ANCHOR_EXCERPTS.contains(anchor), "{id}: {anchor:?}");
/// }
/// ```
pub const ANCHOR_EXCERPTS: &str = include_str!("../../data/anchor_excerpts.txt");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Library {
    Pytorch,
    Tensorflow,
    Xgboost,
    General,
}

impl Library {
    /// Import roots that activate a `library-imported` rule when the rule
    /// does not list its own modules.
    pub fn default_modules(self) -> &'static [&'static str] {
        match self {
            Library::Pytorch => &["torch"],
            Library::Tensorflow => &["tensorflow"],
            Library::Xgboost => &["xgboost"],
            Library::General => &[],
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Library::Pytorch => "pytorch",
            Library::Tensorflow => "tensorflow",
            Library::Xgboost => "xgboost",
            Library::General => "general",
        }
    }
}

impl FromStr for Library {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "pytorch" => Ok(Library::Pytorch),
            "tensorflow" => Ok(Library::Tensorflow),
            "xgboost" => Ok(Library::Xgboost),
            "general" => Ok(Library::General),
            other => Err(format!(
                "unknown library `{other}` (expected pytorch, tensorflow, xgboost or general)"
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RuleKind {
    RequiredCall,
    RequiredAssign,
    RequiredEnv,
    ForbiddenCall,
    RequiredKeywordArg,
    AdvisoryPattern,
}

impl RuleKind {
    pub fn is_required(self) -> bool {
        matches!(
            self,
            RuleKind::RequiredCall
                | RuleKind::RequiredAssign
                | RuleKind::RequiredEnv
                | RuleKind::RequiredKeywordArg
        )
    }

    /// Fact kinds a matcher of this rule kind is tested against.
    pub fn fact_kinds(self) -> &'static [FactKind] {
        match self {
            RuleKind::RequiredCall | RuleKind::ForbiddenCall => &[FactKind::Call],
            RuleKind::RequiredAssign => &[FactKind::Assign, FactKind::KeywordArg],
            RuleKind::RequiredEnv => &[FactKind::EnvSet],
            RuleKind::RequiredKeywordArg => &[FactKind::KeywordArg],
            RuleKind::AdvisoryPattern => &[
                FactKind::Call,
                FactKind::Assign,
                FactKind::EnvSet,
                FactKind::KeywordArg,
            ],
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            RuleKind::RequiredCall => "required-call",
            RuleKind::RequiredAssign => "required-assign",
            RuleKind::RequiredEnv => "required-env",
            RuleKind::ForbiddenCall => "forbidden-call",
            RuleKind::RequiredKeywordArg => "required-keyword-arg",
            RuleKind::AdvisoryPattern => "advisory-pattern",
        }
    }
}

impl FromStr for RuleKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        [
            RuleKind::RequiredCall,
            RuleKind::RequiredAssign,
            RuleKind::RequiredEnv,
            RuleKind::ForbiddenCall,
            RuleKind::RequiredKeywordArg,
            RuleKind::AdvisoryPattern,
        ]
        .into_iter()
        .find(|k| k.as_str() == s)
        .ok_or_else(|| format!("unknown rule kind `{s}`"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Warning,
    Error,
}

impl Severity {
    pub fn as_str(self) -> &'static str {
        match self {
            Severity::Warning => "warning",
            Severity::Error => "error",
        }
    }
}

impl fmt::Display for Severity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Severity {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "error" => Ok(Severity::Error),
            "warning" => Ok(Severity::Warning),
            other => Err(format!("unknown severity `{other}` (expected error or warning)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Activation {
    Always,
    LibraryImported,
}

impl FromStr for Activation {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "always" => Ok(Activation::Always),
            "library-imported" => Ok(Activation::LibraryImported),
            other => Err(format!(
                "unknown activation `{other}` (expected always or library-imported)"
            )),
        }
    }
}

/// Glob over canonical paths; `*` matches any run of characters, including
/// dots. A pattern without `*` is an exact match.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PathPattern(String);

impl PathPattern {
    pub fn new(pattern: impl Into<String>) -> Self {
        PathPattern(pattern.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn matches(&self, path: &str) -> bool {
        glob_match(self.0.as_bytes(), path.as_bytes())
    }
}

impl fmt::Display for PathPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

fn glob_match(pattern: &[u8], text: &[u8]) -> bool {
    // Iterative wildcard match with single-star backtracking.
    let (mut p, mut t) = (0, 0);
    let mut star: Option<(usize, usize)> = None;
    while t < text.len() {
        if p < pattern.len() && pattern[p] == b'*' {
            star = Some((p, t));
            p += 1;
        } else if p < pattern.len() && pattern[p] == text[t] {
            p += 1;
            t += 1;
        } else if let Some((sp, st)) = star {
            p = sp + 1;
            t = st + 1;
            star = Some((sp, st + 1));
        } else {
            return false;
        }
    }
    pattern[p..].iter().all(|&c| c == b'*')
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matcher {
    pub paths: Vec<PathPattern>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value: Option<Literal>,
}

impl Matcher {
    pub fn new<I, S>(paths: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Matcher { paths: paths.into_iter().map(PathPattern::new).collect(), value: None }
    }

    pub fn with_value(mut self, value: Literal) -> Self {
        self.value = Some(value);
        self
    }

    pub fn matches_path(&self, path: &str) -> bool {
        self.paths.iter().any(|p| p.matches(path))
    }

    pub fn matches(&self, fact: &Fact) -> bool {
        self.matches_path(&fact.canonical_path)
            && match &self.value {
                None => true,
                Some(v) => fact.value.as_ref() == Some(v),
            }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rule {
    pub id: String,
    pub library: Library,
    pub kind: RuleKind,
    pub matcher: Matcher,
    pub severity: Severity,
    pub message: String,
    pub fix_hint: String,
    pub activation: Activation,
    /// Overrides [`Library::default_modules`] for activation.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub modules: Vec<String>,
    pub paper_anchor: String,
}

impl Rule {
    pub fn activation_modules(&self) -> Vec<&str> {
        if self.modules.is_empty() {
            self.library.default_modules().to_vec()
        } else {
            self.modules.iter().map(String::as_str).collect()
        }
    }

    pub fn is_active(&self, imported: &BTreeSet<String>) -> bool {
        match self.activation {
            Activation::Always => true,
            Activation::LibraryImported => {
                self.activation_modules().iter().any(|m| imported.contains(*m))
            }
        }
    }

    pub fn matches(&self, fact: &Fact) -> bool {
        self.kind.fact_kinds().contains(&fact.kind) && self.matcher.matches(fact)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RuleCatalog {
    rules: BTreeMap<String, Rule>,
    pub catalog_version: semver::Version,
}

impl RuleCatalog {
    pub fn new(catalog_version: semver::Version) -> Self {
        RuleCatalog { rules: BTreeMap::new(), catalog_version }
    }

    /// Look up a rule; unknown ids are `None`, never an error.
    pub fn lookup(&self, id: &str) -> Option<&Rule> {
        self.rules.get(id)
    }

    /// Rules in id order.
    pub fn iter(&self) -> impl Iterator<Item = &Rule> {
        self.rules.values()
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.rules.keys().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.rules.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }

    /// Insert or replace by id; returns the replaced rule.
    pub fn insert(&mut self, rule: Rule) -> Option<Rule> {
        self.rules.insert(rule.id.clone(), rule)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::facts::Location;

    fn fact(kind: FactKind, path: &str, value: Option<Literal>) -> Fact {
        Fact {
            kind,
            canonical_path: path.into(),
            value,
            location: Location { file: "f.py".into(), line: 1, column: 1 },
            resolved: true,
        }
    }

    #[test]
    fn glob_semantics() {
        let p = PathPattern::new("torch.nn.MaxPool3d");
        assert!(p.matches("torch.nn.MaxPool3d"));
        assert!(!p.matches("torch.nn.MaxPool3dX"));
        let suffix = PathPattern::new("*.intra_op_parallelism_threads");
        assert!(suffix.matches("session_config.intra_op_parallelism_threads"));
        assert!(!suffix.matches("intra_op_parallelism_threads"));
        let mid = PathPattern::new("xgboost.*#seed");
        assert!(mid.matches("xgboost.train#seed"));
        assert!(mid.matches("xgboost.sklearn.XGBClassifier#seed"));
        assert!(!mid.matches("xgboost.train#seeds"));
        assert!(PathPattern::new("*").matches(""));
        assert!(PathPattern::new("a**b").matches("ab"));
        assert!(!PathPattern::new("a*b").matches("ba"));
    }

    #[test]
    fn value_match_is_strict() {
        let m = Matcher::new(["env:TF_DETERMINISTIC_OPS"]).with_value(Literal::Str("1".into()));
        assert!(m.matches(&fact(FactKind::EnvSet, "env:TF_DETERMINISTIC_OPS", Some(Literal::Str("1".into())))));
        assert!(!m.matches(&fact(FactKind::EnvSet, "env:TF_DETERMINISTIC_OPS", Some(Literal::Int(1)))));
        assert!(!m.matches(&fact(FactKind::EnvSet, "env:TF_DETERMINISTIC_OPS", Some(Literal::NonLiteral))));
    }

    #[test]
    fn rule_kind_filters_fact_kinds() {
        let catalog = builtin_rules();
        let benchmark = catalog.lookup("pytorch-cudnn-benchmark").unwrap();
        let assign = fact(FactKind::Assign, "torch.backends.cudnn.benchmark", Some(Literal::Bool(false)));
        let call = fact(FactKind::Call, "torch.backends.cudnn.benchmark", Some(Literal::Bool(false)));
        assert!(benchmark.matches(&assign));
        assert!(!benchmark.matches(&call));
    }

    #[test]
    fn activation_uses_modules() {
        let catalog = builtin_rules();
        let numpy_seed = catalog.lookup("general-numpy-seed").unwrap();
        let mut imported = BTreeSet::new();
        assert!(!numpy_seed.is_active(&imported));
        imported.insert("numpy".to_string());
        assert!(numpy_seed.is_active(&imported));
        let hashseed = catalog.lookup("general-pythonhashseed").unwrap();
        assert!(!hashseed.is_active(&imported));
        imported.insert("xgboost".to_string());
        assert!(hashseed.is_active(&imported));
    }

    #[test]
    fn enum_parsing() {
        assert_eq!("forbidden-call".parse::<RuleKind>().unwrap(), RuleKind::ForbiddenCall);
        assert!("forbidden_call".parse::<RuleKind>().is_err());
        assert_eq!("warning".parse::<Severity>().unwrap(), Severity::Warning);
        assert!(Severity::Error > Severity::Warning);
        assert!("jax".parse::<Library>().is_err());
    }
}
