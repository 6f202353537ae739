//! Rule files.
//!
//! ```toml
//! catalog_format = 1
//!
//! [[rule]]
//! id = "pytorch-set-deterministic"
//! severity = "error"                 # partial redefinition of a built-in
//!
//! [[rule]]
//! id = "pytorch-forbidden-avgpool3d" # new rule: all keys below required
//! library = "pytorch"
//! kind = "forbidden-call"
//! path = ["torch.nn.AvgPool3d", "torch.nn.AvgPool3d.*"]
//! severity = "error"
//! message = "AvgPool3d backward is non-deterministic on CUDA"
//! fix_hint = "use a strided convolution"
//! activation = "library-imported"
//! # optional: value = false, modules = ["torch"], paper_anchor = "..."
//! ```
//!
//! A rule whose id already exists replaces the existing entry; keys it
//! omits are inherited from that entry. A document with no content at all is
//! an empty overlay.

use std::collections::BTreeSet;

use serde::Deserialize;
use sha2::{Digest, Sha256};
use thiserror::Error;

use super::{builtin_rules, Matcher, PathPattern, Rule, RuleCatalog};
use crate::facts::Literal;

pub const CATALOG_FORMAT: i64 = 1;

#[derive(Debug, Error)]
pub enum RuleFileError {
    #[error("rule file is not valid UTF-8")]
    NotUtf8,
    #[error("rule file line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("rule file line {line}: duplicate rule id `{id}`")]
    DuplicateId { id: String, line: usize },
    #[error("rule file line {line}: rule `{id}`: {message}")]
    InvalidRule { id: String, line: usize, message: String },
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDocument {
    catalog_format: Option<toml::Spanned<i64>>,
    #[serde(default)]
    rule: Vec<toml::Spanned<RawRule>>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum RawPaths {
    One(String),
    Many(Vec<String>),
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRule {
    id: String,
    library: Option<String>,
    kind: Option<String>,
    path: Option<RawPaths>,
    value: Option<toml::Value>,
    severity: Option<String>,
    message: Option<String>,
    fix_hint: Option<String>,
    activation: Option<String>,
    modules: Option<Vec<String>>,
    paper_anchor: Option<String>,
}

/// Built-in catalog overlaid with the rules in `document`.
pub fn load_rules(document: &[u8]) -> Result<RuleCatalog, RuleFileError> {
    let mut catalog = builtin_rules();
    catalog.overlay(document)?;
    Ok(catalog)
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].bytes().filter(|b| *b == b'\n').count() + 1
}

fn is_blank(text: &str) -> bool {
    text.lines().all(|l| {
        let l = l.trim();
        l.is_empty() || l.starts_with('#')
    })
}

fn literal_of(value: toml::Value) -> Result<Literal, String> {
    match value {
        toml::Value::String(s) => Ok(Literal::Str(s)),
        toml::Value::Integer(i) => Ok(Literal::Int(i)),
        toml::Value::Float(f) => Ok(Literal::Float(f)),
        toml::Value::Boolean(b) => Ok(Literal::Bool(b)),
        other => Err(format!("`value` must be a string, number or boolean, found {}", other.type_str())),
    }
}

impl RuleCatalog {
    /// Overlay a rule file onto this catalog. On error the catalog is left
    /// unchanged.
    pub fn overlay(&mut self, document: &[u8]) -> Result<(), RuleFileError> {
        let text = std::str::from_utf8(document).map_err(|_| RuleFileError::NotUtf8)?;
        if is_blank(text) {
            return Ok(());
        }
        let raw: RawDocument = toml::from_str(text).map_err(|e| RuleFileError::Parse {
            line: e.span().map_or(1, |s| line_of(text, s.start)),
            message: e.message().trim().to_string(),
        })?;

        match &raw.catalog_format {
            None => {
                return Err(RuleFileError::Parse {
                    line: 1,
                    message: format!("missing mandatory `catalog_format = {CATALOG_FORMAT}`"),
                })
            }
            Some(f) if *f.get_ref() != CATALOG_FORMAT => {
                return Err(RuleFileError::Parse {
                    line: line_of(text, f.span().start),
                    message: format!(
                        "unsupported catalog_format {} (this tool reads {CATALOG_FORMAT})",
                        f.get_ref()
                    ),
                })
            }
            Some(_) => {}
        }

        let mut seen = BTreeSet::new();
        for spanned in &raw.rule {
            let id = &spanned.get_ref().id;
            if !seen.insert(id.as_str()) {
                let line = line_of(text, spanned.span().start);
                return Err(RuleFileError::DuplicateId { id: id.clone(), line });
            }
        }

        let mut staged = Vec::with_capacity(raw.rule.len());
        for spanned in raw.rule {
            let line = line_of(text, spanned.span().start);
            let raw_rule = spanned.into_inner();
            let id = raw_rule.id.clone();
            let rule = self
                .merge_rule(raw_rule)
                .map_err(|message| RuleFileError::InvalidRule { id, line, message })?;
            staged.push(rule);
        }

        for rule in staged {
            self.insert(rule);
        }
        self.refresh_version();
        Ok(())
    }

    fn merge_rule(&self, raw: RawRule) -> Result<Rule, String> {
        if raw.id.is_empty()
            || !raw.id.chars().all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || c == '-')
        {
            return Err("id must be kebab-case (lowercase letters, digits, '-')".into());
        }
        let base = self.lookup(&raw.id).cloned();
        let missing = |key: &str| format!("new rule is missing required key `{key}`");

        let library = match (raw.library, &base) {
            (Some(s), _) => s.parse()?,
            (None, Some(b)) => b.library,
            (None, None) => return Err(missing("library")),
        };
        let kind = match (raw.kind, &base) {
            (Some(s), _) => s.parse()?,
            (None, Some(b)) => b.kind,
            (None, None) => return Err(missing("kind")),
        };
        let paths = match (raw.path, &base) {
            (Some(RawPaths::One(p)), _) => vec![PathPattern::new(p)],
            (Some(RawPaths::Many(ps)), _) => ps.into_iter().map(PathPattern::new).collect(),
            (None, Some(b)) => b.matcher.paths.clone(),
            (None, None) => return Err(missing("path")),
        };
        if paths.is_empty() || paths.iter().any(|p| p.as_str().is_empty()) {
            return Err("`path` must name at least one non-empty pattern".into());
        }
        let value = match (raw.value, &base) {
            (Some(v), _) => Some(literal_of(v)?),
            (None, Some(b)) => b.matcher.value.clone(),
            (None, None) => None,
        };
        let severity = match (raw.severity, &base) {
            (Some(s), _) => s.parse()?,
            (None, Some(b)) => b.severity,
            (None, None) => return Err(missing("severity")),
        };
        let activation = match (raw.activation, &base) {
            (Some(s), _) => s.parse()?,
            (None, Some(b)) => b.activation,
            (None, None) => return Err(missing("activation")),
        };
        let text_field = |v: Option<String>, b: Option<&String>, key: &str| match (v, b) {
            (Some(s), _) => Ok(s),
            (None, Some(s)) => Ok(s.clone()),
            (None, None) => Err(missing(key)),
        };
        let message = text_field(raw.message, base.as_ref().map(|b| &b.message), "message")?;
        let fix_hint = text_field(raw.fix_hint, base.as_ref().map(|b| &b.fix_hint), "fix_hint")?;
        let paper_anchor = raw
            .paper_anchor
            .or_else(|| base.as_ref().map(|b| b.paper_anchor.clone()))
            .unwrap_or_default();
        let modules = raw
            .modules
            .or_else(|| base.as_ref().map(|b| b.modules.clone()))
            .unwrap_or_default();

        Ok(Rule {
            id: raw.id,
            library,
            kind,
            matcher: Matcher { paths, value },
            severity,
            message,
            fix_hint,
            activation,
            modules,
            paper_anchor,
        })
    }

    /// Catalogs that differ from the built-in set carry a content
    /// fingerprint as semver build metadata (`1.0.0+rules.1a2b3c4d`).
    fn refresh_version(&mut self) {
        let builtin = builtin_rules();
        let mut version = builtin.catalog_version.clone();
        if self.rules != builtin.rules {
            let json = serde_json::to_vec(&self.rules).expect("rules serialize");
            let digest = Sha256::digest(&json);
            let tag = format!("rules.{}", &hex::encode(digest)[..8]);
            version.build = semver::BuildMetadata::new(&tag).expect("valid build metadata");
        }
        self.catalog_version = version;
    }
}
