use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Component, Path};
use std::sync::LazyLock;

use regex::Regex;
use semver::Version;
use serde::{Deserialize, Serialize};
use walkdir::WalkDir;

use super::ScaffoldError;

/// `{{ key }}` with a lowercase identifier key. Anything else (including
/// GitHub expressions like `${{ github.ref }}`) is left alone.
static PLACEHOLDER: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"\{\{\s*([a-z][a-z0-9_]*)\s*\}\}").expect("static regex"));

pub const DESCRIPTOR_FILE: &str = "template.toml";
pub const FILES_DIR: &str = "files";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Variable {
    pub key: String,
    pub prompt: String,
    pub default: String,
    /// Whole-value validation pattern (implicitly anchored).
    pub regex: String,
}

impl Variable {
    fn validator(&self) -> Result<Regex, regex::Error> {
        Regex::new(&format!("^(?:{})$", self.regex))
    }

    pub fn accepts(&self, value: &str) -> bool {
        self.validator().is_ok_and(|re| re.is_match(value))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TemplateDescriptor {
    pub name: String,
    pub version: Version,
    pub description: String,
    pub variables: Vec<Variable>,
    /// Relative `/`-separated path to file text with placeholders.
    pub files: BTreeMap<String, String>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDescriptor {
    name: String,
    version: String,
    #[serde(default)]
    description: String,
    #[serde(default, rename = "variable")]
    variables: Vec<Variable>,
}

fn invalid(name: &str, message: impl Into<String>) -> ScaffoldError {
    ScaffoldError::InvalidTemplate { name: name.to_string(), message: message.into() }
}

fn valid_ident(s: &str, extra: &[char]) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some('a'..='z'))
        && chars.all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || c == '_' || extra.contains(&c))
}

/// Placeholder keys used in `text`, in order of first appearance.
pub fn placeholders(text: &str) -> Vec<String> {
    let mut seen = BTreeSet::new();
    PLACEHOLDER
        .captures_iter(text)
        .map(|c| c[1].to_string())
        .filter(|k| seen.insert(k.clone()))
        .collect()
}

fn substitute(text: &str, values: &BTreeMap<String, String>) -> String {
    PLACEHOLDER
        .replace_all(text, |c: &regex::Captures| values.get(&c[1]).cloned().unwrap_or_else(|| c[0].to_string()))
        .into_owned()
}

impl TemplateDescriptor {
    /// Build a descriptor, checking that every placeholder is declared,
    /// every validation pattern compiles and every default validates.
    pub fn new(
        name: impl Into<String>,
        version: Version,
        description: impl Into<String>,
        variables: Vec<Variable>,
        files: BTreeMap<String, String>,
    ) -> Result<Self, ScaffoldError> {
        let name = name.into();
        if !valid_ident(&name, &['-']) {
            return Err(invalid(&name, "template names are lowercase identifiers"));
        }
        let mut keys = BTreeSet::new();
        for var in &variables {
            if !valid_ident(&var.key, &[]) {
                return Err(invalid(&name, format!("bad variable key `{}`", var.key)));
            }
            if !keys.insert(var.key.as_str()) {
                return Err(invalid(&name, format!("variable `{}` declared twice", var.key)));
            }
            let re = var
                .validator()
                .map_err(|e| invalid(&name, format!("variable `{}`: bad pattern: {e}", var.key)))?;
            if !re.is_match(&var.default) {
                return Err(invalid(&name, format!("default of `{}` fails its own pattern", var.key)));
            }
        }
        for (path, text) in &files {
            let p = Path::new(path);
            if path.is_empty() || path.contains('\\') || !p.components().all(|c| matches!(c, Component::Normal(_))) {
                return Err(invalid(&name, format!("file path `{path}` must be relative and normalized")));
            }
            if let Some(key) = placeholders(text).into_iter().find(|k| !keys.contains(k.as_str())) {
                return Err(invalid(&name, format!("{path}: placeholder `{key}` has no variable")));
            }
        }
        Ok(TemplateDescriptor { name, version, description: description.into(), variables, files })
    }

    pub fn from_parts(descriptor_toml: &str, files: BTreeMap<String, String>) -> Result<Self, ScaffoldError> {
        let raw: RawDescriptor =
            toml::from_str(descriptor_toml).map_err(|e| invalid("?", format!("{DESCRIPTOR_FILE}: {}", e.message())))?;
        let version = Version::parse(&raw.version)
            .map_err(|e| invalid(&raw.name, format!("version `{}`: {e}", raw.version)))?;
        Self::new(raw.name, version, raw.description, raw.variables, files)
    }

    /// Load `DIR/template.toml` and every file below `DIR/files/`.
    pub fn load_dir(dir: &Path) -> Result<Self, ScaffoldError> {
        let io = |path: &Path| {
            let path = path.to_path_buf();
            move |source| ScaffoldError::Io { path, source }
        };
        let desc_path = dir.join(DESCRIPTOR_FILE);
        let descriptor = fs::read_to_string(&desc_path).map_err(io(&desc_path))?;
        let root = dir.join(FILES_DIR);
        let mut files = BTreeMap::new();
        for entry in WalkDir::new(&root).sort_by_file_name() {
            let entry = entry.map_err(|e| ScaffoldError::Io {
                path: root.clone(),
                source: e.into_io_error().unwrap_or_else(|| std::io::Error::other("walk failed")),
            })?;
            if !entry.file_type().is_file() {
                continue;
            }
            let rel = entry
                .path()
                .strip_prefix(&root)
                .expect("walk stays below root")
                .components()
                .map(|c| c.as_os_str().to_string_lossy().into_owned())
                .collect::<Vec<_>>()
                .join("/");
            let text = fs::read_to_string(entry.path()).map_err(io(entry.path()))?;
            files.insert(rel, text);
        }
        Self::from_parts(&descriptor, files)
    }

    /// Write the descriptor back out in the directory layout `load_dir` reads.
    pub fn save_dir(&self, dir: &Path) -> Result<(), ScaffoldError> {
        let io = |path: &Path| {
            let path = path.to_path_buf();
            move |source| ScaffoldError::Io { path, source }
        };
        let mut doc = toml::Table::new();
        doc.insert("name".into(), self.name.clone().into());
        doc.insert("version".into(), self.version.to_string().into());
        doc.insert("description".into(), self.description.clone().into());
        let vars = toml::Value::try_from(&self.variables).expect("variables serialize");
        doc.insert("variable".into(), vars);
        fs::create_dir_all(dir).map_err(io(dir))?;
        let desc = dir.join(DESCRIPTOR_FILE);
        fs::write(&desc, toml::to_string(&doc).expect("table serializes")).map_err(io(&desc))?;
        for (rel, text) in &self.files {
            let path = dir.join(FILES_DIR).join(rel);
            if let Some(parent) = path.parent() {
                fs::create_dir_all(parent).map_err(io(parent))?;
            }
            fs::write(&path, text).map_err(io(&path))?;
        }
        Ok(())
    }

    /// Fill in defaults and validate answers.
    ///
    /// With `allow_unknown` answers for variables the template does not
    /// declare are dropped instead of rejected (stored answers of an older
    /// template version during sync).
    pub fn resolve_answers(
        &self,
        answers: &BTreeMap<String, String>,
        allow_unknown: bool,
    ) -> Result<BTreeMap<String, String>, ScaffoldError> {
        if !allow_unknown {
            if let Some(key) = answers.keys().find(|k| !self.variables.iter().any(|v| &v.key == *k)) {
                return Err(ScaffoldError::UnknownVariable { template: self.name.clone(), variable: key.clone() });
            }
        }
        let mut out = BTreeMap::new();
        for var in &self.variables {
            let value = answers.get(&var.key).unwrap_or(&var.default);
            let re = var.validator().expect("validated at construction");
            if !re.is_match(value) {
                return Err(ScaffoldError::InvalidAnswer {
                    variable: var.key.clone(),
                    value: value.clone(),
                    pattern: var.regex.clone(),
                });
            }
            out.insert(var.key.clone(), value.clone());
        }
        Ok(out)
    }

    /// Render every file with already-resolved answers.
    pub fn render_resolved(&self, resolved: &BTreeMap<String, String>) -> BTreeMap<String, String> {
        self.files.iter().map(|(p, t)| (p.clone(), substitute(t, resolved))).collect()
    }

    pub fn render(&self, answers: &BTreeMap<String, String>) -> Result<BTreeMap<String, String>, ScaffoldError> {
        Ok(self.render_resolved(&self.resolve_answers(answers, false)?))
    }
}

macro_rules! embedded {
    ($dir:literal, [$($file:literal),* $(,)?]) => {
        (
            include_str!(concat!("../../templates/", $dir, "/template.toml")),
            &[$(($file, include_str!(concat!("../../templates/", $dir, "/files/", $file)))),*] as &[(&str, &str)],
        )
    };
}

fn embedded_sources() -> [(&'static str, &'static [(&'static str, &'static str)]); 3] {
    [
        embedded!("pytorch", [
            ".github/workflows/lint.yml", "docs/index.md", "README.md",
            "Dockerfile", "environment.yml", "seeding.py", "train.py",
        ]),
        embedded!("tensorflow", [
            ".github/workflows/lint.yml", "docs/index.md", "README.md",
            "Dockerfile", "environment.yml", "seeding.py", "train.py",
        ]),
        embedded!("xgboost", [
            ".github/workflows/lint.yml", "docs/index.md", "README.md",
            "Dockerfile", "environment.yml", "seeding.py", "train.py",
        ]),
    ]
}

/// Templates compiled into the binary, sorted by name.
pub fn builtin_templates() -> Vec<TemplateDescriptor> {
    embedded_sources()
        .into_iter()
        .map(|(desc, files)| {
            let files = files.iter().map(|(p, t)| (p.to_string(), t.to_string())).collect();
            TemplateDescriptor::from_parts(desc, files).expect("embedded templates are valid")
        })
        .collect()
}

/// Templates found in `dir`: either `dir` itself is a template directory,
/// or each immediate subdirectory holding a `template.toml` is one.
pub fn load_templates(dir: &Path) -> Result<Vec<TemplateDescriptor>, ScaffoldError> {
    if dir.join(DESCRIPTOR_FILE).is_file() {
        return Ok(vec![TemplateDescriptor::load_dir(dir)?]);
    }
    let entries = fs::read_dir(dir).map_err(|source| ScaffoldError::Io { path: dir.to_path_buf(), source })?;
    let mut subdirs: Vec<_> = entries
        .filter_map(Result::ok)
        .map(|e| e.path())
        .filter(|p| p.join(DESCRIPTOR_FILE).is_file())
        .collect();
    subdirs.sort();
    subdirs.iter().map(|d| TemplateDescriptor::load_dir(d)).collect()
}

/// Highest version of `name` in `available`, or exactly `version` if given.
pub fn select_template<'a>(
    available: &'a [TemplateDescriptor],
    name: &str,
    version: Option<&Version>,
) -> Result<&'a TemplateDescriptor, ScaffoldError> {
    let mut candidates = available.iter().filter(|t| t.name == name).peekable();
    if candidates.peek().is_none() {
        return Err(ScaffoldError::UnknownTemplate(name.to_string()));
    }
    match version {
        Some(v) => candidates.find(|t| &t.version == v).ok_or_else(|| ScaffoldError::TemplateVersionNotFound {
            name: name.to_string(),
            version: v.clone(),
        }),
        None => Ok(candidates.max_by(|a, b| a.version.cmp(&b.version)).expect("non-empty")),
    }
}
