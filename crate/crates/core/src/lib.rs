//! Determinism compliance toolkit for machine-learning training projects.
//!
//! * [`facts`] turns Python sources into alias-resolved facts.
//! * [`rules`] holds the rule catalog (built-in plus file overlays).
//! * [`lint`] evaluates rules against files and whole projects.
//! * [`scaffold`] renders versioned project templates and syncs them.
//! * [`sysintel`] collects hardware inventories and run manifests.

pub mod facts;
pub mod lint;
pub mod rules;
pub mod scaffold;
pub mod sysintel;

pub use semver::Version;

/// Version reported in lint reports, manifests and `detml --version`.
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");
