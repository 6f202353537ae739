use std::collections::BTreeSet;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use globset::{Glob, GlobSet, GlobSetBuilder};
use rayon::prelude::*;
use thiserror::Error;
use walkdir::WalkDir;

use super::report::{Counts, FileReport, LintReport};
use super::{missing_requirements, pattern_hits, sort_violations, Scope, Violation};
use crate::facts::{extract, Diagnostic, FactSet, Location};
use crate::rules::{RuleCatalog, Severity};
use crate::scaffold::{ProjectConfig, STAMP_PATH};
use crate::TOOL_VERSION;

/// Ids of the project-structure checks. They are not catalog rules.
pub const PROJECT_CHECK_IDS: &[&str] = &[
    "project-config-stamp",
    "project-containerfile",
    "project-cublas-workspace",
    "project-env-pinned",
];

/// Source quote for each project check, keyed like [`PROJECT_CHECK_IDS`].
pub const PROJECT_CHECK_ANCHORS: &[(&str, &str)] = &[
    ("project-config-stamp", "TEMPLATE"),
    ("project-containerfile", "Docker"),
    ("project-cublas-workspace", "CUBLAS_WORKSPACE_CONFIG=:4096:8"),
    ("project-env-pinned", "Conda"),
];

const CUBLAS_VAR: &str = "CUBLAS_WORKSPACE_CONFIG";
const CUBLAS_VALUE: &str = ":4096:8";

#[derive(Debug, Error)]
pub enum LintError {
    #[error("cannot read project root {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("invalid glob `{glob}`: {message}")]
    Glob { glob: String, message: String },
}

#[derive(Debug, Clone)]
pub struct LintOptions {
    /// Globs over root-relative `/`-separated paths selecting files to lint.
    pub include: Vec<String>,
    pub exclude: Vec<String>,
    /// Directory names never descended into.
    pub ignore_dirs: Vec<String>,
    pub strict: bool,
    pub require_stamp: bool,
    /// Environment manifest; when unset the first existing of
    /// `environment.yml`, `environment.yaml`, `requirements.txt` is used.
    pub env_manifest: Option<PathBuf>,
    /// Container build file; when unset `Dockerfile` then `Containerfile`.
    pub container_file: Option<PathBuf>,
}

impl Default for LintOptions {
    fn default() -> Self {
        LintOptions {
            include: vec!["**/*.py".into()],
            exclude: Vec::new(),
            ignore_dirs: [".git", ".detml", "__pycache__", ".venv", "venv", ".tox", "node_modules", "build", "dist"]
                .into_iter()
                .map(String::from)
                .collect(),
            strict: false,
            require_stamp: false,
            env_manifest: None,
            container_file: None,
        }
    }
}

fn glob_set(globs: &[String]) -> Result<GlobSet, LintError> {
    let mut builder = GlobSetBuilder::new();
    for g in globs {
        let glob = Glob::new(g).map_err(|e| LintError::Glob { glob: g.clone(), message: e.to_string() })?;
        builder.add(glob);
    }
    builder.build().map_err(|e| LintError::Glob { glob: globs.join(","), message: e.to_string() })
}

fn relative(root: &Path, path: &Path) -> String {
    let rel = path.strip_prefix(root).unwrap_or(path);
    rel.components()
        .map(|c| c.as_os_str().to_string_lossy())
        .collect::<Vec<_>>()
        .join("/")
}

fn discover(root: &Path, options: &LintOptions) -> Result<Vec<(String, PathBuf)>, LintError> {
    let include = glob_set(&options.include)?;
    let exclude = glob_set(&options.exclude)?;
    let mut files = Vec::new();
    let walker = WalkDir::new(root).sort_by_file_name().into_iter().filter_entry(|e| {
        if e.depth() == 0 {
            return true;
        }
        let rel = relative(root, e.path());
        if e.file_type().is_dir() {
            let name = e.file_name().to_string_lossy();
            !options.ignore_dirs.iter().any(|d| *d == name) && !exclude.is_match(&rel)
        } else {
            true
        }
    });
    for entry in walker.filter_map(Result::ok) {
        if !entry.file_type().is_file() {
            continue;
        }
        let rel = relative(root, entry.path());
        if include.is_match(&rel) && !exclude.is_match(&rel) {
            files.push((rel, entry.into_path()));
        }
    }
    Ok(files)
}

fn file_diagnostic(path: &str, message: String) -> Diagnostic {
    Diagnostic { message, location: Location { file: path.to_string(), line: 1, column: 1 } }
}

type Analysed = Vec<(String, Result<FactSet, String>)>;

/// `root` may also name a single file, which is then linted on its own.
fn analyse(root: &Path, options: &LintOptions) -> Result<Analysed, LintError> {
    let files = if root.is_file() {
        let name = root.file_name().map_or_else(|| relative(Path::new(""), root), |n| n.to_string_lossy().into_owned());
        vec![(name, root.to_path_buf())]
    } else {
        fs::read_dir(root).map_err(|source| LintError::Io { path: root.to_path_buf(), source })?;
        discover(root, options)?
    };
    Ok(files
        .par_iter()
        .map(|(rel, abs)| {
            let result = fs::read(abs)
                .map_err(|e| format!("unreadable file: {e}"))
                .and_then(|bytes| extract(&bytes, rel).map_err(|e| format!("skipped: {e}")));
            (rel.clone(), result)
        })
        .collect())
}

/// Alias-resolved facts of every file `lint_project` would lint, sorted by
/// path. Files that cannot be read or decoded are left out.
pub fn project_facts(root: &Path, options: &LintOptions) -> Result<Vec<FactSet>, LintError> {
    let mut sets: Vec<FactSet> = analyse(root, options)?.into_iter().filter_map(|(_, r)| r.ok()).collect();
    sets.sort_by(|a, b| a.file.cmp(&b.file));
    Ok(sets)
}

/// Lint every matching source file under `root` plus project-structure
/// checks, returning the canonical report. When `root` is a file only that
/// file is linted and the structure checks are skipped.
///
/// Required rules use project-union semantics: a seed set in any linted
/// file satisfies the requirement for the whole project, and the resulting
/// violations are project-scoped. Forbidden and advisory hits stay attached
/// to their file.
pub fn lint_project(root: &Path, catalog: &RuleCatalog, options: &LintOptions) -> Result<LintReport, LintError> {
    let analysed = analyse(root, options)?;

    let mut reports = Vec::with_capacity(analysed.len());
    let mut sets = Vec::with_capacity(analysed.len());
    for (path, result) in analysed {
        match result {
            Ok(set) => {
                let mut violations = pattern_hits(catalog, &set);
                sort_violations(&mut violations);
                reports.push(FileReport {
                    path,
                    violations,
                    diagnostics: set.parse_diagnostics.clone(),
                });
                sets.push(set);
            }
            Err(message) => reports.push(FileReport {
                diagnostics: vec![file_diagnostic(&path, message)],
                path,
                violations: Vec::new(),
            }),
        }
    }
    reports.sort_by(|a, b| a.path.cmp(&b.path));

    let imported: BTreeSet<String> =
        sets.iter().flat_map(|s| s.imported_libraries.iter().cloned()).collect();
    let mut project = missing_requirements(
        catalog,
        &imported,
        sets.iter().flat_map(|s| s.facts.iter()),
        Scope::Project,
    );

    let mut notes = Vec::new();
    if root.is_file() {
        notes.push(format!("{}: single file, project structure checks skipped", root.display()));
    } else {
        project.extend(structure_checks(root, options, &imported, &mut notes));
    }
    sort_violations(&mut project);

    let mut report = LintReport {
        tool_version: TOOL_VERSION.to_string(),
        catalog_version: catalog.catalog_version.to_string(),
        files: reports,
        project_violations: project,
        counts: Counts::default(),
        exit_code: 0,
        notes,
    };
    if options.strict {
        report.promote_warnings();
    } else {
        report.recount();
    }
    Ok(report)
}

fn project_violation(
    rule_id: &str,
    severity: Severity,
    location: Option<Location>,
    message: String,
    fix_hint: &str,
) -> Violation {
    let anchor = PROJECT_CHECK_ANCHORS.iter().find(|(id, _)| *id == rule_id).map_or("", |(_, a)| a);
    Violation {
        rule_id: rule_id.to_string(),
        severity,
        scope: Scope::Project,
        location,
        message,
        fix_hint: fix_hint.to_string(),
        paper_anchor: anchor.to_string(),
    }
}

fn first_existing(root: &Path, configured: &Option<PathBuf>, defaults: &[&str]) -> (PathBuf, bool) {
    if let Some(p) = configured {
        let full = root.join(p);
        let exists = full.is_file();
        return (p.clone(), exists);
    }
    for d in defaults {
        if root.join(d).is_file() {
            return (PathBuf::from(d), true);
        }
    }
    (PathBuf::from(defaults[0]), false)
}

fn structure_checks(
    root: &Path,
    options: &LintOptions,
    imported: &BTreeSet<String>,
    notes: &mut Vec<String>,
) -> Vec<Violation> {
    let mut out = Vec::new();

    let (container, has_container) =
        first_existing(root, &options.container_file, &["Dockerfile", "Containerfile"]);
    if !has_container {
        out.push(project_violation(
            "project-containerfile",
            Severity::Error,
            None,
            format!("no container build file ({}) at the project root", container.display()),
            "add a Dockerfile that reproduces the full runtime environment",
        ));
    } else if imported.contains("torch") {
        let text = fs::read_to_string(root.join(&container)).unwrap_or_default();
        if dockerfile_env(&text, CUBLAS_VAR).as_deref() != Some(CUBLAS_VALUE) {
            out.push(project_violation(
                "project-cublas-workspace",
                Severity::Warning,
                None,
                format!("{} does not set {CUBLAS_VAR}={CUBLAS_VALUE}", container.display()),
                "add `ENV CUBLAS_WORKSPACE_CONFIG=:4096:8` so cuBLAS picks a deterministic workspace",
            ));
        }
    }

    let (manifest, has_manifest) = first_existing(
        root,
        &options.env_manifest,
        &["environment.yml", "environment.yaml", "requirements.txt"],
    );
    let manifest_name = relative(Path::new(""), &manifest);
    if !has_manifest {
        out.push(project_violation(
            "project-env-pinned",
            Severity::Error,
            None,
            format!("no environment manifest ({manifest_name}) found"),
            "add an environment.yml listing every dependency with an exact version",
        ));
    } else {
        let text = fs::read_to_string(root.join(&manifest)).unwrap_or_default();
        for dep in dependency_lines(&text, &manifest_name) {
            match classify_pin(&dep.spec) {
                Pin::Exact => {}
                Pin::Unpinned => out.push(project_violation(
                    "project-env-pinned",
                    Severity::Warning,
                    Some(Location { file: manifest_name.clone(), line: dep.line, column: 1 }),
                    format!("dependency `{}` is not pinned to an exact version", dep.spec),
                    "pin it as `name=version` (conda) or `name==version` (pip)",
                )),
                Pin::Complex => notes.push(format!(
                    "{manifest_name}:{}: skipped complex dependency spec `{}`",
                    dep.line, dep.spec
                )),
            }
        }
    }

    if options.require_stamp {
        let problem = match ProjectConfig::load(root) {
            Ok(_) => None,
            Err(e) => Some(e.to_string()),
        };
        if let Some(problem) = problem {
            out.push(project_violation(
                "project-config-stamp",
                Severity::Error,
                None,
                format!("project stamp {STAMP_PATH} missing or unreadable: {problem}"),
                "create the project with `detml create` or restore the stamp from version control",
            ));
        }
    }
    out
}

/// Value assigned to `key` by the last `ENV` instruction setting it.
pub(crate) fn dockerfile_env(text: &str, key: &str) -> Option<String> {
    let mut logical = Vec::new();
    let mut current = String::new();
    for raw in text.lines() {
        let line = raw.trim_end();
        if current.is_empty() && line.trim_start().starts_with('#') {
            continue;
        }
        if let Some(stripped) = line.strip_suffix('\\') {
            current.push_str(stripped);
            current.push(' ');
        } else {
            current.push_str(line);
            logical.push(std::mem::take(&mut current));
        }
    }
    if !current.is_empty() {
        logical.push(current);
    }

    let mut found = None;
    for line in logical {
        let trimmed = line.trim_start();
        let Some((instr, rest)) = trimmed.split_once(char::is_whitespace) else { continue };
        if !instr.eq_ignore_ascii_case("ENV") {
            continue;
        }
        let rest = rest.trim();
        let first = rest.split_whitespace().next().unwrap_or_default();
        if first.contains('=') {
            for token in shell_words(rest) {
                if let Some((k, v)) = token.split_once('=') {
                    if k == key {
                        found = Some(v.to_string());
                    }
                }
            }
        } else if first == key {
            // legacy `ENV KEY value`
            let value = rest[first.len()..].trim();
            found = Some(unquote(value).to_string());
        }
    }
    found
}

fn unquote(s: &str) -> &str {
    let s = s.trim();
    for q in ['"', '\''] {
        if s.len() >= 2 && s.starts_with(q) && s.ends_with(q) {
            return &s[1..s.len() - 1];
        }
    }
    s
}

/// Whitespace-separated words with simple single/double quote grouping.
fn shell_words(s: &str) -> Vec<String> {
    let mut words = Vec::new();
    let mut cur = String::new();
    let mut quote: Option<char> = None;
    let mut in_word = false;
    for c in s.chars() {
        match quote {
            Some(q) if c == q => quote = None,
            Some(_) => cur.push(c),
            None if c == '"' || c == '\'' => {
                quote = Some(c);
                in_word = true;
            }
            None if c.is_whitespace() => {
                if in_word {
                    words.push(std::mem::take(&mut cur));
                    in_word = false;
                }
            }
            None => {
                cur.push(c);
                in_word = true;
            }
        }
    }
    if in_word {
        words.push(cur);
    }
    words
}

pub(crate) struct DependencyLine {
    pub line: u32,
    pub spec: String,
}

/// Dependency entries of a conda `environment.yml` (items under
/// `dependencies:`, including a nested `pip:` list) or of a pip
/// requirements file.
pub(crate) fn dependency_lines(text: &str, name: &str) -> Vec<DependencyLine> {
    let yaml = name.ends_with(".yml") || name.ends_with(".yaml");
    let mut out = Vec::new();
    let mut in_deps = false;
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx as u32 + 1;
        let without_comment = match raw.find(" #") {
            Some(i) => &raw[..i],
            None if raw.trim_start().starts_with('#') => "",
            None => raw,
        };
        let trimmed = without_comment.trim();
        if trimmed.is_empty() {
            continue;
        }
        if !yaml {
            if !trimmed.starts_with('-') {
                out.push(DependencyLine { line: line_no, spec: trimmed.to_string() });
            }
            continue;
        }
        let indented = raw.starts_with([' ', '\t']);
        if !indented && !trimmed.starts_with('-') {
            in_deps = trimmed.trim_end_matches(':').trim() == "dependencies";
            continue;
        }
        if !in_deps {
            continue;
        }
        if let Some(item) = trimmed.strip_prefix('-') {
            let item = unquote(item.trim());
            if item.is_empty() || item.ends_with(':') {
                continue;
            }
            out.push(DependencyLine { line: line_no, spec: item.to_string() });
        }
    }
    out
}

#[derive(Debug, PartialEq, Eq)]
pub(crate) enum Pin {
    Exact,
    Unpinned,
    Complex,
}

pub(crate) fn classify_pin(spec: &str) -> Pin {
    let is_name = |s: &str| {
        !s.is_empty()
            && s.chars().all(|c| c.is_ascii_alphanumeric() || matches!(c, '_' | '-' | '.' | '[' | ']' | ','))
    };
    let is_version = |s: &str| {
        !s.is_empty() && s.chars().all(|c| c.is_ascii_alphanumeric() || matches!(c, '_' | '-' | '.' | '+' | '!'))
    };
    if is_name(spec) {
        return Pin::Unpinned;
    }
    let split = spec.split_once("==").or_else(|| spec.split_once('='));
    match split {
        Some((name, version)) if is_name(name) => {
            if version.contains('*') {
                Pin::Unpinned
            } else if is_version(version) {
                Pin::Exact
            } else {
                Pin::Complex
            }
        }
        _ => Pin::Complex,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pins() {
        assert_eq!(classify_pin("python=3.8.5"), Pin::Exact);
        assert_eq!(classify_pin("torch==1.7.1"), Pin::Exact);
        assert_eq!(classify_pin("mlflow"), Pin::Unpinned);
        assert_eq!(classify_pin("numpy=1.*"), Pin::Unpinned);
        assert_eq!(classify_pin("numpy>=1.19"), Pin::Complex);
        assert_eq!(classify_pin("pkg @ https://x/y.whl"), Pin::Complex);
        assert_eq!(classify_pin("cudatoolkit=11.0=h6bb024c_0"), Pin::Complex);
    }

    #[test]
    fn environment_yml_items_under_dependencies_only() {
        let text = "name: proj\nchannels:\n  - pytorch\n  - conda-forge\ndependencies:\n  - python=3.8.5\n  - numpy # comment\n  - pip:\n    - torch==1.7.1\n";
        let deps: Vec<_> = dependency_lines(text, "environment.yml")
            .into_iter()
            .map(|d| (d.line, d.spec))
            .collect();
        assert_eq!(
            deps,
            [(6, "python=3.8.5".to_string()), (7, "numpy".to_string()), (9, "torch==1.7.1".to_string())]
        );
    }

    #[test]
    fn requirements_txt() {
        let text = "# pinned\nnumpy==1.19.2\n-r other.txt\nscipy\n";
        let deps: Vec<_> = dependency_lines(text, "requirements.txt").into_iter().map(|d| d.spec).collect();
        assert_eq!(deps, ["numpy==1.19.2", "scipy"]);
    }

    #[test]
    fn dockerfile_env_forms() {
        assert_eq!(dockerfile_env("FROM x\nENV CUBLAS_WORKSPACE_CONFIG=:4096:8\n", CUBLAS_VAR).as_deref(), Some(":4096:8"));
        assert_eq!(dockerfile_env("env A=1 CUBLAS_WORKSPACE_CONFIG=\":4096:8\"\n", CUBLAS_VAR).as_deref(), Some(":4096:8"));
        assert_eq!(dockerfile_env("ENV CUBLAS_WORKSPACE_CONFIG :4096:8\n", CUBLAS_VAR).as_deref(), Some(":4096:8"));
        assert_eq!(
            dockerfile_env("ENV A=1 \\\n    CUBLAS_WORKSPACE_CONFIG=:16:8\n", CUBLAS_VAR).as_deref(),
            Some(":16:8")
        );
        assert_eq!(dockerfile_env("# ENV CUBLAS_WORKSPACE_CONFIG=:4096:8\n", CUBLAS_VAR), None);
        assert_eq!(dockerfile_env("RUN echo CUBLAS_WORKSPACE_CONFIG=:4096:8\n", CUBLAS_VAR), None);
    }
}
