//! Canonical facts extracted from Python training scripts.
//!
//! A [`FactSet`] is the substrate the rule engine matches against: imports,
//! dotted-name calls, attribute assignments, environment writes and keyword
//! arguments, each with a source [`Location`]. Extraction is grammar-based
//! (tree-sitter) and flow-insensitive: facts inside `if`, `try` or function
//! bodies count the same as top-level ones.

mod literal;
mod parse;
mod resolve;

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use literal::Literal;
pub use parse::parse_source;
pub use resolve::resolve_aliases;

/// Prefix carried by [`FactKind::EnvSet`] paths.
pub const ENV_PREFIX: &str = "env:";

#[derive(Debug, Error)]
pub enum FactsError {
    #[error("{file}: source is not valid UTF-8: {source}")]
    InvalidUtf8 {
        file: String,
        #[source]
        source: std::str::Utf8Error,
    },
}

/// 1-based position of a fact in its source file.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Location {
    pub file: String,
    pub line: u32,
    pub column: u32,
}

impl fmt::Display for Location {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}", self.file, self.line, self.column)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FactKind {
    Import,
    Call,
    Assign,
    EnvSet,
    KeywordArg,
}

impl fmt::Display for FactKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            FactKind::Import => "import",
            FactKind::Call => "call",
            FactKind::Assign => "assign",
            FactKind::EnvSet => "env_set",
            FactKind::KeywordArg => "keyword_arg",
        };
        f.write_str(s)
    }
}

/// One observation about the source.
///
/// `canonical_path` is a dotted name (`torch.backends.cudnn.benchmark`),
/// `env:NAME` for environment writes, or `callee#kwarg` for keyword
/// arguments. `resolved` is false when the root name of the path had no
/// import binding in the file (builtins, undefined names, locals).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fact {
    pub kind: FactKind,
    pub canonical_path: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value: Option<Literal>,
    pub location: Location,
    pub resolved: bool,
}

/// A name bound by an import statement, e.g. `np` → `numpy`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImportBinding {
    pub name: String,
    pub target: String,
    pub line: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub message: String,
    pub location: Location,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactSet {
    pub file: String,
    pub facts: Vec<Fact>,
    pub imported_libraries: BTreeSet<String>,
    pub bindings: Vec<ImportBinding>,
    pub parse_diagnostics: Vec<Diagnostic>,
    /// Set once [`resolve_aliases`] has run.
    #[serde(default)]
    pub aliases_resolved: bool,
}

impl FactSet {
    pub fn empty(file: impl Into<String>) -> Self {
        FactSet {
            file: file.into(),
            facts: Vec::new(),
            imported_libraries: BTreeSet::new(),
            bindings: Vec::new(),
            parse_diagnostics: Vec::new(),
            aliases_resolved: false,
        }
    }

    pub fn imports(&self, module: &str) -> bool {
        self.imported_libraries.contains(module)
    }

    pub fn facts_of(&self, kind: FactKind) -> impl Iterator<Item = &Fact> {
        self.facts.iter().filter(move |f| f.kind == kind)
    }

    /// Pretty JSON used for fixture authoring (`detml lint --dump-facts`).
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("fact sets always serialize")
    }
}

/// Parse and alias-resolve in one step.
pub fn extract(text: &[u8], file: &str) -> Result<FactSet, FactsError> {
    parse_source(text, file).map(resolve_aliases)
}

/// Top-level module of an import path: `torch.backends.cudnn` → `torch`.
/// Relative imports keep their leading dots (`.utils.io` → `.utils`).
pub fn top_level_module(path: &str) -> &str {
    let dots = path.len() - path.trim_start_matches('.').len();
    let rest = &path[dots..];
    let end = rest.find(['.', '#']).unwrap_or(rest.len());
    &path[..dots + end]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn top_level_of_paths() {
        assert_eq!(top_level_module("torch.backends.cudnn"), "torch");
        assert_eq!(top_level_module("numpy"), "numpy");
        assert_eq!(top_level_module(".utils.io"), ".utils");
        assert_eq!(top_level_module("..x"), "..x");
        assert_eq!(top_level_module("a.*"), "a");
    }
}
