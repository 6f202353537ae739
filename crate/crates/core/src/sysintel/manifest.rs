use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};
use thiserror::Error;

use super::HardwareReport;
use crate::TOOL_VERSION;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ManifestError {
    #[error("hyperparameter `{key}` is not a literal (string, number or boolean)")]
    NonLiteralHyperparameter { key: String },
    #[error("metric `{key}` is not a finite number: `{value}`")]
    NonNumericMetric { key: String, value: String },
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
}

/// Literal hyperparameter value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParamValue {
    Bool(bool),
    Int(i64),
    Float(f64),
    Str(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub hardware: HardwareReport,
    pub hyperparameters: BTreeMap<String, ParamValue>,
    pub metrics: BTreeMap<String, f64>,
    pub source_revision: Option<String>,
    pub environment_digest: String,
    pub tool_version: String,
}

/// Flat `key = value` file: blank lines and `#` comments ignored,
/// duplicate keys rejected.
pub fn parse_key_values(text: &str) -> Result<BTreeMap<String, String>, ManifestError> {
    let mut out = BTreeMap::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let syntax = |message: String| ManifestError::Syntax { line: idx + 1, message };
        let (k, v) = line.split_once('=').ok_or_else(|| syntax(format!("expected `key = value`, found `{line}`")))?;
        let key = k.trim();
        if key.is_empty() {
            return Err(syntax("empty key".into()));
        }
        if out.insert(key.to_string(), v.trim().to_string()).is_some() {
            return Err(syntax(format!("duplicate key `{key}`")));
        }
    }
    Ok(out)
}

/// Interpret the textual value of a flat-file entry: JSON scalars keep
/// their type, anything that is not JSON is a plain string.
pub fn parse_value(text: &str) -> Value {
    serde_json::from_str(text).unwrap_or_else(|_| Value::String(text.to_string()))
}

fn literal(key: &str, value: &Value) -> Result<ParamValue, ManifestError> {
    let err = || ManifestError::NonLiteralHyperparameter { key: key.to_string() };
    Ok(match value {
        Value::Bool(b) => ParamValue::Bool(*b),
        Value::String(s) => ParamValue::Str(s.clone()),
        Value::Number(n) => match n.as_i64() {
            Some(i) => ParamValue::Int(i),
            None => ParamValue::Float(n.as_f64().filter(|f| f.is_finite()).ok_or_else(err)?),
        },
        Value::Null | Value::Array(_) | Value::Object(_) => return Err(err()),
    })
}

fn number(key: &str, value: &Value) -> Result<f64, ManifestError> {
    value.as_f64().filter(|f| f.is_finite()).ok_or_else(|| ManifestError::NonNumericMetric {
        key: key.to_string(),
        value: value.to_string(),
    })
}

/// `sha256:` + hex digest.
pub fn environment_digest(bytes: &[u8]) -> String {
    format!("sha256:{}", hex::encode(Sha256::digest(bytes)))
}

pub fn build_manifest(
    hardware: HardwareReport,
    hyperparameters: &BTreeMap<String, Value>,
    metrics: &BTreeMap<String, Value>,
    source_revision: Option<String>,
    env_manifest: &[u8],
) -> Result<RunManifest, ManifestError> {
    let hyperparameters =
        hyperparameters.iter().map(|(k, v)| Ok((k.clone(), literal(k, v)?))).collect::<Result<_, _>>()?;
    let metrics = metrics.iter().map(|(k, v)| Ok((k.clone(), number(k, v)?))).collect::<Result<_, _>>()?;
    Ok(RunManifest {
        hardware,
        hyperparameters,
        metrics,
        source_revision,
        environment_digest: environment_digest(env_manifest),
        tool_version: TOOL_VERSION.to_string(),
    })
}
