//! Versioned project templates: rendering, project creation, update checks
//! and template sync against a stored baseline snapshot.
//!
//! A created project carries `.detml/project.cfg` (the stamp: template
//! name, version, answers, creation time) and `.detml/baseline/`, the pure
//! rendering of the stamped template version. Sync renders the newer
//! template with the stored answers, diffs it against the baseline and
//! merges the changes into the working files three-way, with the baseline
//! as common ancestor.

pub mod diff;
mod project;
mod stamp;
mod template;

use std::path::PathBuf;

use semver::Version;
use thiserror::Error;

pub use project::{
    apply_sync, check_for_update, compute_sync, create_project, create_project_at, ApplyResult, FileDiff,
    SyncDiff,
};
pub use stamp::{ProjectConfig, StampError, BASELINE_DIR, STAMP_PATH};
pub use template::{
    builtin_templates, load_templates, placeholders, select_template, TemplateDescriptor, Variable,
    DESCRIPTOR_FILE, FILES_DIR,
};

#[derive(Debug, Error)]
pub enum ScaffoldError {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("destination {} exists and is not empty", .0.display())]
    DestinationNotEmpty(PathBuf),
    #[error("invalid value `{value}` for variable `{variable}` (must match `{pattern}`)")]
    InvalidAnswer { variable: String, value: String, pattern: String },
    #[error("template `{template}` has no variable `{variable}`")]
    UnknownVariable { template: String, variable: String },
    #[error("unknown template `{0}`")]
    UnknownTemplate(String),
    #[error("template `{name}` has no version {version}")]
    TemplateVersionNotFound { name: String, version: Version },
    #[error("invalid template `{name}`: {message}")]
    InvalidTemplate { name: String, message: String },
    #[error("project stamp {STAMP_PATH}: {0}")]
    Stamp(#[from] StampError),
    #[error("baseline snapshot {} is missing; re-initialize the project with `detml create` into a fresh directory and copy your changes over", .0.display())]
    BaselineMissing(PathBuf),
    #[error("project was created from template `{project}`, not `{template}`")]
    TemplateMismatch { project: String, template: String },
    #[error("sync diff starts at version {diff}, but the project is stamped {project}")]
    StaleDiff { project: Version, diff: Version },
    #[error("{path}: {source}")]
    Patch {
        path: String,
        #[source]
        source: diff::PatchError,
    },
}
