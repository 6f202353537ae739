use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{Violation, EXIT_CLEAN, EXIT_FINDINGS};
use crate::facts::Diagnostic;
use crate::rules::Severity;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Text,
    Json,
}

impl FromStr for OutputFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "text" => Ok(OutputFormat::Text),
            "json" => Ok(OutputFormat::Json),
            other => Err(format!("unknown format `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counts {
    pub errors: usize,
    pub warnings: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileReport {
    pub path: String,
    pub violations: Vec<Violation>,
    #[serde(default)]
    pub diagnostics: Vec<Diagnostic>,
}

/// Result of a project lint. Serialized field names are a stable contract.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LintReport {
    pub tool_version: String,
    pub catalog_version: String,
    pub files: Vec<FileReport>,
    pub project_violations: Vec<Violation>,
    pub counts: Counts,
    pub exit_code: i32,
    #[serde(default)]
    pub notes: Vec<String>,
}

impl LintReport {
    pub fn all_violations(&self) -> impl Iterator<Item = &Violation> {
        self.files.iter().flat_map(|f| f.violations.iter()).chain(self.project_violations.iter())
    }

    /// Rewrite every warning as an error (`--strict`).
    pub fn promote_warnings(&mut self) {
        for v in self
            .files
            .iter_mut()
            .flat_map(|f| f.violations.iter_mut())
            .chain(self.project_violations.iter_mut())
        {
            v.severity = Severity::Error;
        }
        self.recount();
    }

    /// Recompute `counts` and `exit_code` from the violation lists.
    pub fn recount(&mut self) {
        let mut counts = Counts::default();
        for v in self.all_violations() {
            match v.severity {
                Severity::Error => counts.errors += 1,
                Severity::Warning => counts.warnings += 1,
            }
        }
        self.counts = counts;
        self.exit_code = if counts.errors == 0 { EXIT_CLEAN } else { EXIT_FINDINGS };
    }

    /// Canonical JSON: keys sorted, two-space indentation, trailing newline.
    pub fn to_json(&self) -> String {
        let value = serde_json::to_value(self).expect("reports always serialize");
        let mut s = serde_json::to_string_pretty(&value).expect("values always serialize");
        s.push('\n');
        s
    }

    /// One line per violation: `SEVERITY rule-id path[:line] message`.
    pub fn to_text(&self, color: bool) -> String {
        let mut out = String::new();
        let paint = |sev: Severity| -> String {
            let label = sev.as_str().to_ascii_uppercase();
            if !color {
                return label;
            }
            match sev {
                Severity::Error => format!("\x1b[31m{label}\x1b[0m"),
                Severity::Warning => format!("\x1b[33m{label}\x1b[0m"),
            }
        };
        for file in &self.files {
            for v in &file.violations {
                let place = match &v.location {
                    Some(l) => format!("{}:{}", file.path, l.line),
                    None => file.path.clone(),
                };
                let _ = writeln!(out, "{} {} {} {}", paint(v.severity), v.rule_id, place, v.message);
            }
        }
        for v in &self.project_violations {
            let place = match &v.location {
                Some(l) => format!("{}:{}", l.file, l.line),
                None => ".".to_string(),
            };
            let _ = writeln!(out, "{} {} {} {}", paint(v.severity), v.rule_id, place, v.message);
        }
        let _ = writeln!(
            out,
            "{} error(s), {} warning(s) in {} file(s)",
            self.counts.errors,
            self.counts.warnings,
            self.files.len()
        );
        out
    }
}
