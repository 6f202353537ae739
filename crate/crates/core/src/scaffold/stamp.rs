//! The project stamp: `.detml/project.cfg`, an INI file recording which
//! template (name and version) a project was rendered from, the variable
//! answers and the creation time.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use semver::Version;
use thiserror::Error;

pub const STAMP_PATH: &str = ".detml/project.cfg";
pub const BASELINE_DIR: &str = ".detml/baseline";

#[derive(Debug, Error)]
pub enum StampError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("missing `{0}`")]
    Missing(&'static str),
    #[error("template version `{value}` is not a semantic version: {message}")]
    BadVersion { value: String, message: String },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProjectConfig {
    pub template_name: String,
    pub template_version: Version,
    pub answers: BTreeMap<String, String>,
    pub created: String,
}

/// Backslash-escape line breaks, tabs and the spaces that trimming would
/// otherwise eat, so every value survives a write/read cycle.
fn escape(v: &str) -> String {
    let mut out = String::with_capacity(v.len());
    let last = v.chars().count().saturating_sub(1);
    for (i, c) in v.chars().enumerate() {
        match c {
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            '\t' => out.push_str("\\t"),
            ' ' if i == 0 || i == last => out.push_str("\\s"),
            c if c.is_whitespace() && (i == 0 || i == last) => {
                let _ = write!(out, "\\u{{{:x}}}", c as u32);
            }
            c => out.push(c),
        }
    }
    out
}

fn unescape(v: &str, line: usize) -> Result<String, StampError> {
    let mut out = String::with_capacity(v.len());
    let mut chars = v.chars();
    while let Some(c) = chars.next() {
        if c != '\\' {
            out.push(c);
            continue;
        }
        match chars.next() {
            Some('\\') => out.push('\\'),
            Some('n') => out.push('\n'),
            Some('r') => out.push('\r'),
            Some('t') => out.push('\t'),
            Some('s') => out.push(' '),
            Some('u') => {
                let rest: String = chars.by_ref().take_while(|&c| c != '}').collect();
                let c = rest
                    .strip_prefix('{')
                    .and_then(|h| u32::from_str_radix(h, 16).ok())
                    .and_then(char::from_u32)
                    .ok_or_else(|| StampError::Syntax { line, message: format!("bad escape `\\u{rest}`") })?;
                out.push(c);
            }
            other => {
                return Err(StampError::Syntax {
                    line,
                    message: format!("bad escape `\\{}`", other.map(String::from).unwrap_or_default()),
                })
            }
        }
    }
    Ok(out)
}

impl ProjectConfig {
    pub fn to_ini(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "[template]");
        let _ = writeln!(out, "name = {}", escape(&self.template_name));
        let _ = writeln!(out, "version = {}", self.template_version);
        let _ = writeln!(out, "\n[answers]");
        for (k, v) in &self.answers {
            let _ = writeln!(out, "{k} = {}", escape(v));
        }
        let _ = writeln!(out, "\n[meta]");
        let _ = writeln!(out, "created = {}", escape(&self.created));
        out
    }

    pub fn parse(text: &str) -> Result<Self, StampError> {
        let mut section = String::new();
        let mut name = None;
        let mut version = None;
        let mut created = None;
        let mut answers = BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') || line.starts_with(';') {
                continue;
            }
            if let Some(rest) = line.strip_prefix('[') {
                let Some(s) = rest.strip_suffix(']') else {
                    return Err(StampError::Syntax { line: line_no, message: "unterminated section header".into() });
                };
                section = s.trim().to_string();
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(StampError::Syntax { line: line_no, message: format!("expected `key = value`, found `{line}`") });
            };
            let key = key.trim().to_string();
            let value = unescape(value.trim(), line_no)?;
            match (section.as_str(), key.as_str()) {
                ("template", "name") => name = Some(value),
                ("template", "version") => version = Some(value),
                ("meta", "created") => created = Some(value),
                ("answers", _) => {
                    answers.insert(key, value);
                }
                _ => {
                    return Err(StampError::Syntax {
                        line: line_no,
                        message: format!("unexpected key `{key}` in section [{section}]"),
                    })
                }
            }
        }
        let version = version.ok_or(StampError::Missing("template.version"))?;
        let template_version = Version::parse(&version)
            .map_err(|e| StampError::BadVersion { value: version.clone(), message: e.to_string() })?;
        Ok(ProjectConfig {
            template_name: name.ok_or(StampError::Missing("template.name"))?,
            template_version,
            answers,
            created: created.ok_or(StampError::Missing("meta.created"))?,
        })
    }

    /// Read the stamp of the project rooted at `root`.
    pub fn load(root: &Path) -> Result<Self, StampError> {
        let path = root.join(STAMP_PATH);
        let text = fs::read_to_string(&path)
            .map_err(|source| StampError::Io { path: STAMP_PATH.to_string(), source })?;
        Self::parse(&text)
    }
}
