use std::collections::BTreeMap;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use semver::Version;
use serde::{Deserialize, Serialize};
use walkdir::WalkDir;

use super::diff::{apply_patch, merge3, unified_diff};
use super::stamp::{ProjectConfig, BASELINE_DIR, STAMP_PATH};
use super::template::TemplateDescriptor;
use super::ScaffoldError;

const STAGING_DIR: &str = ".detml/staging";

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> ScaffoldError {
    let path = path.to_path_buf();
    move |source| ScaffoldError::Io { path, source }
}

fn write_file(path: &Path, text: &str) -> Result<(), ScaffoldError> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(io_err(parent))?;
    }
    fs::write(path, text).map_err(io_err(path))
}

fn write_tree(root: &Path, files: &BTreeMap<String, String>) -> Result<(), ScaffoldError> {
    for (rel, text) in files {
        write_file(&root.join(rel), text)?;
    }
    Ok(())
}

fn read_tree(root: &Path) -> Result<BTreeMap<String, String>, ScaffoldError> {
    let mut out = BTreeMap::new();
    for entry in WalkDir::new(root).sort_by_file_name() {
        let entry = entry.map_err(|e| ScaffoldError::Io {
            path: root.to_path_buf(),
            source: e.into_io_error().unwrap_or_else(|| io::Error::other("walk failed")),
        })?;
        if !entry.file_type().is_file() {
            continue;
        }
        let rel = entry
            .path()
            .strip_prefix(root)
            .expect("walk stays below root")
            .components()
            .map(|c| c.as_os_str().to_string_lossy().into_owned())
            .collect::<Vec<_>>()
            .join("/");
        out.insert(rel, fs::read_to_string(entry.path()).map_err(io_err(entry.path()))?);
    }
    Ok(out)
}

fn read_optional(path: &Path) -> Result<Option<String>, ScaffoldError> {
    match fs::read_to_string(path) {
        Ok(t) => Ok(Some(t)),
        Err(e) if e.kind() == io::ErrorKind::NotFound => Ok(None),
        Err(e) => Err(ScaffoldError::Io { path: path.to_path_buf(), source: e }),
    }
}

fn now_utc() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true)
}

/// Render `descriptor` into `dest`, stamping it with the current time.
pub fn create_project(
    descriptor: &TemplateDescriptor,
    answers: &BTreeMap<String, String>,
    dest: &Path,
) -> Result<PathBuf, ScaffoldError> {
    create_project_at(descriptor, answers, dest, &now_utc())
}

/// [`create_project`] with an explicit creation timestamp.
pub fn create_project_at(
    descriptor: &TemplateDescriptor,
    answers: &BTreeMap<String, String>,
    dest: &Path,
    created: &str,
) -> Result<PathBuf, ScaffoldError> {
    match fs::read_dir(dest) {
        Ok(mut entries) => {
            if entries.next().is_some() {
                return Err(ScaffoldError::DestinationNotEmpty(dest.to_path_buf()));
            }
        }
        Err(e) if e.kind() == io::ErrorKind::NotFound => {}
        Err(e) => {
            if dest.exists() {
                return Err(ScaffoldError::DestinationNotEmpty(dest.to_path_buf()));
            }
            return Err(ScaffoldError::Io { path: dest.to_path_buf(), source: e });
        }
    }
    let resolved = descriptor.resolve_answers(answers, false)?;
    let rendered = descriptor.render_resolved(&resolved);

    fs::create_dir_all(dest).map_err(io_err(dest))?;
    write_tree(dest, &rendered)?;
    write_tree(&dest.join(BASELINE_DIR), &rendered)?;
    let stamp = ProjectConfig {
        template_name: descriptor.name.clone(),
        template_version: descriptor.version.clone(),
        answers: resolved,
        created: created.to_string(),
    };
    write_file(&dest.join(STAMP_PATH), &stamp.to_ini())?;
    log::info!("created {} from {} {}", dest.display(), descriptor.name, descriptor.version);
    Ok(dest.to_path_buf())
}

/// Greatest available version of the stamped template newer than the stamp.
pub fn check_for_update(
    stamp: &ProjectConfig,
    available: &[TemplateDescriptor],
) -> Result<Option<Version>, ScaffoldError> {
    let versions: Vec<&Version> =
        available.iter().filter(|t| t.name == stamp.template_name).map(|t| &t.version).collect();
    if versions.is_empty() {
        return Err(ScaffoldError::UnknownTemplate(stamp.template_name.clone()));
    }
    Ok(versions.into_iter().filter(|v| **v > stamp.template_version).max().cloned())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileDiff {
    pub path: String,
    pub diff: String,
}

/// Changes between the stamped template rendering and a newer one, both
/// rendered with the project's stored answers.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SyncDiff {
    pub template: String,
    pub from_version: Version,
    pub to_version: Version,
    pub added: Vec<String>,
    pub removed: Vec<String>,
    pub modified: Vec<FileDiff>,
    /// Full text of each added file.
    pub added_contents: BTreeMap<String, String>,
    /// Answers resolved against the new template; stored in the stamp
    /// after a clean apply.
    pub answers: BTreeMap<String, String>,
}

impl SyncDiff {
    pub fn is_empty(&self) -> bool {
        self.added.is_empty() && self.removed.is_empty() && self.modified.is_empty()
    }
}

fn load_baseline(root: &Path) -> Result<BTreeMap<String, String>, ScaffoldError> {
    let dir = root.join(BASELINE_DIR);
    if !dir.is_dir() {
        return Err(ScaffoldError::BaselineMissing(dir));
    }
    read_tree(&dir)
}

/// Diff `new` (rendered with the stamp's answers) against the project's
/// baseline snapshot. Working files are not read.
pub fn compute_sync(root: &Path, new: &TemplateDescriptor) -> Result<SyncDiff, ScaffoldError> {
    let stamp = ProjectConfig::load(root)?;
    if stamp.template_name != new.name {
        return Err(ScaffoldError::TemplateMismatch { project: stamp.template_name, template: new.name.clone() });
    }
    let baseline = load_baseline(root)?;
    let answers = new.resolve_answers(&stamp.answers, true)?;
    let mut diff = SyncDiff {
        template: new.name.clone(),
        from_version: stamp.template_version.clone(),
        to_version: new.version.clone(),
        added: Vec::new(),
        removed: Vec::new(),
        modified: Vec::new(),
        added_contents: BTreeMap::new(),
        answers,
    };
    if stamp.template_version == new.version {
        diff.answers = stamp.answers;
        return Ok(diff);
    }
    let rendered = new.render_resolved(&diff.answers);
    for (path, text) in &rendered {
        match baseline.get(path) {
            None => {
                diff.added.push(path.clone());
                diff.added_contents.insert(path.clone(), text.clone());
            }
            Some(old) if old != text => diff.modified.push(FileDiff {
                path: path.clone(),
                diff: unified_diff(old, text, &format!("a/{path}"), &format!("b/{path}")),
            }),
            Some(_) => {}
        }
    }
    diff.removed = baseline.keys().filter(|p| !rendered.contains_key(*p)).cloned().collect();
    Ok(diff)
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ApplyResult {
    pub applied: Vec<String>,
    pub conflicted: Vec<String>,
}

enum Action {
    Write(String),
    Delete,
}

/// Merge `diff` into the working tree of the project at `root`.
///
/// Every changed file is first written to a staging directory, then moved
/// into place, so an I/O failure while preparing leaves the tree as it was.
/// The stamp and baseline move to the new version only when nothing
/// conflicted.
pub fn apply_sync(root: &Path, diff: &SyncDiff) -> Result<ApplyResult, ScaffoldError> {
    let mut stamp = ProjectConfig::load(root)?;
    if stamp.template_name != diff.template {
        return Err(ScaffoldError::TemplateMismatch { project: stamp.template_name, template: diff.template.clone() });
    }
    if stamp.template_version != diff.from_version {
        return Err(ScaffoldError::StaleDiff { project: stamp.template_version, diff: diff.from_version.clone() });
    }
    let mut result = ApplyResult::default();
    if diff.from_version == diff.to_version && diff.is_empty() {
        return Ok(result);
    }
    let mut baseline = load_baseline(root)?;
    let theirs_label = format!("template {}", diff.to_version);

    let mut actions: Vec<(String, Action)> = Vec::new();
    for fd in &diff.modified {
        let base = baseline.get(&fd.path).cloned().unwrap_or_default();
        let new = apply_patch(&base, &fd.diff).map_err(|source| ScaffoldError::Patch { path: fd.path.clone(), source })?;
        match read_optional(&root.join(&fd.path))? {
            None => result.conflicted.push(fd.path.clone()),
            Some(working) if working == base => {
                actions.push((fd.path.clone(), Action::Write(new.clone())));
                result.applied.push(fd.path.clone());
            }
            Some(working) => {
                let merged = merge3(&base, &working, &new, "working", &theirs_label);
                if merged.conflicts == 0 {
                    result.applied.push(fd.path.clone());
                } else {
                    result.conflicted.push(fd.path.clone());
                }
                if merged.text != working {
                    actions.push((fd.path.clone(), Action::Write(merged.text)));
                }
            }
        }
        baseline.insert(fd.path.clone(), new);
    }
    for path in &diff.added {
        let new = diff.added_contents.get(path).cloned().unwrap_or_default();
        match read_optional(&root.join(path))? {
            None => {
                actions.push((path.clone(), Action::Write(new.clone())));
                result.applied.push(path.clone());
            }
            Some(working) if working == new => result.applied.push(path.clone()),
            Some(working) => {
                let merged = merge3("", &working, &new, "working", &theirs_label);
                if merged.conflicts == 0 {
                    result.applied.push(path.clone());
                } else {
                    result.conflicted.push(path.clone());
                }
                actions.push((path.clone(), Action::Write(merged.text)));
            }
        }
        baseline.insert(path.clone(), new);
    }
    for path in &diff.removed {
        let base = baseline.remove(path).unwrap_or_default();
        match read_optional(&root.join(path))? {
            None => result.applied.push(path.clone()),
            Some(working) if working == base => {
                actions.push((path.clone(), Action::Delete));
                result.applied.push(path.clone());
            }
            // Edited locally: keep the user's file and report it.
            Some(_) => result.conflicted.push(path.clone()),
        }
    }

    commit(root, &actions)?;

    if result.conflicted.is_empty() {
        replace_baseline(root, &baseline)?;
        stamp.template_version = diff.to_version.clone();
        stamp.answers = diff.answers.clone();
        let tmp = root.join(".detml/project.cfg.tmp");
        write_file(&tmp, &stamp.to_ini())?;
        fs::rename(&tmp, root.join(STAMP_PATH)).map_err(io_err(&tmp))?;
    }
    result.applied.sort();
    result.conflicted.sort();
    Ok(result)
}

/// Stage all writes, then move them into place and perform deletions.
fn commit(root: &Path, actions: &[(String, Action)]) -> Result<(), ScaffoldError> {
    let staging = root.join(STAGING_DIR);
    if staging.exists() {
        fs::remove_dir_all(&staging).map_err(io_err(&staging))?;
    }
    let staged: Result<(), ScaffoldError> = actions.iter().try_for_each(|(path, action)| match action {
        Action::Write(text) => write_file(&staging.join(path), text),
        Action::Delete => Ok(()),
    });
    if let Err(e) = staged {
        let _ = fs::remove_dir_all(&staging);
        return Err(e);
    }
    for (path, action) in actions {
        let target = root.join(path);
        match action {
            Action::Write(_) => {
                if let Some(parent) = target.parent() {
                    fs::create_dir_all(parent).map_err(io_err(parent))?;
                }
                let from = staging.join(path);
                fs::rename(&from, &target).map_err(io_err(&target))?;
            }
            Action::Delete => {
                fs::remove_file(&target).map_err(io_err(&target))?;
                prune_empty_dirs(root, &target);
            }
        }
    }
    if staging.exists() {
        fs::remove_dir_all(&staging).map_err(io_err(&staging))?;
    }
    Ok(())
}

fn prune_empty_dirs(root: &Path, removed: &Path) {
    let mut dir = removed.parent();
    while let Some(d) = dir {
        if d == root || fs::remove_dir(d).is_err() {
            break;
        }
        dir = d.parent();
    }
}

fn replace_baseline(root: &Path, files: &BTreeMap<String, String>) -> Result<(), ScaffoldError> {
    let current = root.join(BASELINE_DIR);
    let next = root.join(".detml/baseline.next");
    let prev = root.join(".detml/baseline.prev");
    for d in [&next, &prev] {
        if d.exists() {
            fs::remove_dir_all(d).map_err(io_err(d))?;
        }
    }
    fs::create_dir_all(&next).map_err(io_err(&next))?;
    if let Err(e) = write_tree(&next, files) {
        let _ = fs::remove_dir_all(&next);
        return Err(e);
    }
    fs::rename(&current, &prev).map_err(io_err(&current))?;
    fs::rename(&next, &current).map_err(io_err(&next))?;
    fs::remove_dir_all(&prev).map_err(io_err(&prev))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scaffold::builtin_templates;

    fn pytorch() -> TemplateDescriptor {
        builtin_templates().into_iter().find(|t| t.name == "pytorch").unwrap()
    }

    fn bumped(t: &TemplateDescriptor, edit: impl FnOnce(&mut BTreeMap<String, String>)) -> TemplateDescriptor {
        let mut next = t.clone();
        next.version = Version::new(1, 1, 0);
        edit(&mut next.files);
        next
    }

    #[test]
    fn refuses_non_empty_destination() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("x"), "").unwrap();
        let err = create_project(&pytorch(), &BTreeMap::new(), dir.path()).unwrap_err();
        assert!(matches!(err, ScaffoldError::DestinationNotEmpty(_)));
    }

    #[test]
    fn invalid_answer_names_variable_and_writes_nothing() {
        let dir = tempfile::tempdir().unwrap();
        let dest = dir.path().join("p");
        let answers = BTreeMap::from([("project_name".to_string(), "Bad Name".to_string())]);
        let err = create_project(&pytorch(), &answers, &dest).unwrap_err();
        assert!(err.to_string().contains("project_name"));
        assert!(!dest.exists());
    }

    #[test]
    fn stamp_and_baseline_written() {
        let dir = tempfile::tempdir().unwrap();
        let t = pytorch();
        create_project_at(&t, &BTreeMap::new(), dir.path(), "2021-01-01T00:00:00Z").unwrap();
        let stamp = ProjectConfig::load(dir.path()).unwrap();
        assert_eq!(stamp.template_name, "pytorch");
        assert_eq!(stamp.template_version, t.version);
        assert_eq!(read_tree(&dir.path().join(BASELINE_DIR)).unwrap(), t.render(&BTreeMap::new()).unwrap());
    }

    #[test]
    fn update_check() {
        let t = pytorch();
        let stamp = ProjectConfig {
            template_name: "pytorch".into(),
            template_version: Version::new(1, 0, 0),
            answers: BTreeMap::new(),
            created: String::new(),
        };
        assert_eq!(check_for_update(&stamp, std::slice::from_ref(&t)).unwrap(), None);
        let mut versions = vec![t.clone()];
        for v in [Version::new(1, 2, 0), Version::new(1, 1, 0)] {
            let mut n = t.clone();
            n.version = v;
            versions.push(n);
        }
        assert_eq!(check_for_update(&stamp, &versions).unwrap(), Some(Version::new(1, 2, 0)));
        let unknown = ProjectConfig { template_name: "jax".into(), ..stamp };
        assert!(check_for_update(&unknown, &versions).is_err());
    }

    #[test]
    fn sync_identity_and_missing_baseline() {
        let dir = tempfile::tempdir().unwrap();
        let t = pytorch();
        create_project(&t, &BTreeMap::new(), dir.path()).unwrap();
        let diff = compute_sync(dir.path(), &t).unwrap();
        assert!(diff.is_empty());
        assert_eq!(apply_sync(dir.path(), &diff).unwrap(), ApplyResult::default());
        fs::remove_dir_all(dir.path().join(BASELINE_DIR)).unwrap();
        assert!(matches!(compute_sync(dir.path(), &bumped(&t, |_| {})), Err(ScaffoldError::BaselineMissing(_))));
    }

    #[test]
    fn removed_file_deleted_unless_edited() {
        let dir = tempfile::tempdir().unwrap();
        let t = pytorch();
        create_project(&t, &BTreeMap::new(), dir.path()).unwrap();
        let next = bumped(&t, |f| {
            f.remove("docs/index.md");
            f.remove("README.md");
        });
        fs::write(dir.path().join("README.md"), "mine\n").unwrap();
        let diff = compute_sync(dir.path(), &next).unwrap();
        assert_eq!(diff.removed, ["README.md", "docs/index.md"]);
        let res = apply_sync(dir.path(), &diff).unwrap();
        assert_eq!(res.applied, ["docs/index.md"]);
        assert_eq!(res.conflicted, ["README.md"]);
        assert!(!dir.path().join("docs").exists());
        assert_eq!(fs::read_to_string(dir.path().join("README.md")).unwrap(), "mine\n");
        assert_eq!(ProjectConfig::load(dir.path()).unwrap().template_version, Version::new(1, 0, 0));
    }

    #[test]
    fn stale_diff_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let t = pytorch();
        create_project(&t, &BTreeMap::new(), dir.path()).unwrap();
        let next = bumped(&t, |f| {
            f.insert("NOTES.md".into(), "n\n".into());
        });
        let diff = compute_sync(dir.path(), &next).unwrap();
        apply_sync(dir.path(), &diff).unwrap();
        assert!(matches!(apply_sync(dir.path(), &diff), Err(ScaffoldError::StaleDiff { .. })));
    }
}
